#include "convmg/field.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
namespace {
// Large fields churn through malloc; keep them on the heap instead of
// round-tripping mmap/munmap for every temporary.
struct MallocTuning {
    MallocTuning() {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    }
} malloc_tuning;
}  // namespace
#endif

namespace convmg {

void require_same_shape(const GridField& a, const GridField& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch");
}

GridField axpy(double alpha, const GridField& f, double beta, const GridField& g) {
    require_same_shape(f, g, "axpy");
    GridField out = GridField::uninitialized(f.rows(), f.cols());
    const double* a = f.data();
    const double* b = g.data();
    double* o = out.data();
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = alpha * a[i] + beta * b[i];
    return out;
}

void add_scaled(GridField& x, double alpha, const GridField& y) {
    require_same_shape(x, y, "add_scaled");
    double* a = x.data();
    const double* b = y.data();
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) a[i] += alpha * b[i];
}

double dot(const GridField& f, const GridField& g) {
    require_same_shape(f, g, "dot");
    const double* a = f.data();
    const double* b = g.data();
    double s = 0.0;
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm2(const GridField& f) { return std::sqrt(dot(f, f)); }

GridField hadamard(const GridField& f, const GridField& g) {
    require_same_shape(f, g, "hadamard");
    GridField out = GridField::uninitialized(f.rows(), f.cols());
    const double* a = f.data();
    const double* b = g.data();
    double* o = out.data();
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
    return out;
}

void hadamard_in_place(GridField& f, const GridField& g) {
    require_same_shape(f, g, "hadamard_in_place");
    double* a = f.data();
    const double* b = g.data();
    const std::size_t n = f.size();
    for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
}

}  // namespace convmg
