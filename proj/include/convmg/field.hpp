#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace convmg {

namespace detail {
/// Allocator whose default construction leaves doubles uninitialized, so
/// kernels that overwrite every output entry skip one full memory pass.
template <class T>
struct default_init_allocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = default_init_allocator<U>;
    };
    template <class U>
    void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};
}  // namespace detail

/// Real-valued function on a rows x cols grid of interior points, row-major.
/// Grid-level code always produces square fields of side 2^J - 1; general
/// rectangular shapes are allowed so the convolution primitives can be
/// tested in isolation.
class GridField {
public:
    GridField() = default;

    GridField(int rows, int cols)
        : rows_(rows), cols_(cols), values_(checked_size(rows, cols), 0.0) {}

    /// Skips zero-initialization; caller must write every entry.
    static GridField uninitialized(int rows, int cols) {
        GridField f;
        f.rows_ = rows;
        f.cols_ = cols;
        f.values_.resize(checked_size(rows, cols));
        return f;
    }

    static GridField constant(int rows, int cols, double value) {
        GridField f = uninitialized(rows, cols);
        for (double& v : f.values_) v = value;
        return f;
    }

    static GridField unit_impulse(int rows, int cols, int i, int j) {
        GridField f(rows, cols);
        f(i, j) = 1.0;
        return f;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    double& operator()(int i, int j) { return values_[index(i, j)]; }
    double operator()(int i, int j) const { return values_[index(i, j)]; }

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    double* row(int i) { return values_.data() + std::size_t(i) * cols_; }
    const double* row(int i) const { return values_.data() + std::size_t(i) * cols_; }

    bool same_shape(const GridField& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double value) {
        for (double& v : values_) v = value;
    }

private:
    static std::size_t checked_size(int rows, int cols) {
        if (rows <= 0 || cols <= 0)
            throw std::invalid_argument("GridField: dimensions must be positive");
        return std::size_t(rows) * std::size_t(cols);
    }

    std::size_t index(int i, int j) const { return std::size_t(i) * cols_ + j; }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double, detail::default_init_allocator<double>> values_;
};

/// Interior side length of the level-J grid: 2^J - 1.
inline int grid_side(int level_exponent) {
    if (level_exponent < 1 || level_exponent > 30)
        throw std::invalid_argument("grid_side: exponent out of range");
    return (1 << level_exponent) - 1;
}

void require_same_shape(const GridField& a, const GridField& b, const char* where);

/// alpha*f + beta*g, elementwise.
GridField axpy(double alpha, const GridField& f, double beta, const GridField& g);

/// x += alpha*y, in place.
void add_scaled(GridField& x, double alpha, const GridField& y);

double dot(const GridField& f, const GridField& g);
double norm2(const GridField& f);

/// Elementwise product; used for per-level diagonal rescaling.
GridField hadamard(const GridField& f, const GridField& g);
void hadamard_in_place(GridField& f, const GridField& g);

/// A linear map on fields, shape-preserving unless stated otherwise.
using FieldMap = std::function<GridField(const GridField&)>;

}  // namespace convmg
