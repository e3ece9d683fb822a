#pragma once

#include <cmath>
#include <random>

#include "convmg/field.hpp"
#include "convmg/kernel.hpp"
#include "convmg/rng.hpp"

namespace convmg::test {

inline GridField random_field(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    GridField f(rows, cols);
    fill_uniform(f, eng);
    return f;
}

inline Kernel random_kernel(int size, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    Kernel k(size);
    for (int p = 0; p < size; ++p)
        for (int q = 0; q < size; ++q) k(p, q) = uniform_pm1(eng);
    return k;
}

inline double max_abs_diff(const GridField& a, const GridField& b) {
    double m = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace convmg::test
