#pragma once

#include <functional>

#include "convmg/field.hpp"

namespace convmg {

/// Brute-force dense machinery for small grids; ground truth for the
/// matrix-free paths. Deliberately capped at side 15 (J = 4) so assembly by
/// unit-vector probing stays desk-scale.
class DenseOperator {
public:
    static constexpr int kMaxDim = 15 * 15;

    DenseOperator() = default;
    explicit DenseOperator(int n);

    int dim() const { return n_; }
    double& at(int i, int j) { return entries_[std::size_t(i) * n_ + j]; }
    double at(int i, int j) const { return entries_[std::size_t(i) * n_ + j]; }
    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }

    bool is_symmetric(double tol) const;
    double max_abs() const;

    DenseOperator transposed() const;
    DenseOperator multiply(const DenseOperator& rhs) const;
    GridField apply(const GridField& x) const;

private:
    int n_ = 0;
    std::vector<double> entries_;
};

/// Assembles the matrix of a linear field map by probing with unit vectors;
/// exact by linearity. Throws when rows*cols exceeds the cap.
DenseOperator assemble(const FieldMap& apply, int rows, int cols);

/// Largest |eigenvalue|, via Hessenberg reduction followed by shifted-QR
/// iteration (handles nonsymmetric matrices with complex pairs).
double exact_spectral_radius(const DenseOperator& op);

/// Solves op * x = b by partial-pivoting elimination.
GridField exact_solve(const DenseOperator& op, const GridField& b);

/// Rank of the matrix (full-pivot elimination); dim() means invertible.
int dense_rank(const DenseOperator& op);

}  // namespace convmg
