#include "convmg/conv.hpp"

#include <algorithm>
#include <cstring>

namespace convmg {

namespace {

// Zero-padded copy of f with border width r, kept in thread-local scratch.
// Only the border for the current shape is (re)zeroed; the interior is
// overwritten by the copy.
const double* padded_copy(const GridField& f, int r, int& padded_cols, std::vector<double>& buf) {
    const int R = f.rows(), C = f.cols();
    const int PR = R + 2 * r, PC = C + 2 * r;
    padded_cols = PC;
    if (buf.size() < std::size_t(PR) * PC) buf.resize(std::size_t(PR) * PC);
    double* p = buf.data();
    for (int i = 0; i < r; ++i) {
        std::memset(p + std::size_t(i) * PC, 0, sizeof(double) * PC);
        std::memset(p + std::size_t(PR - 1 - i) * PC, 0, sizeof(double) * PC);
    }
    for (int i = 0; i < R; ++i) {
        double* row = p + std::size_t(i + r) * PC;
        for (int j = 0; j < r; ++j) {
            row[j] = 0.0;
            row[PC - 1 - j] = 0.0;
        }
        std::memcpy(row + r, f.row(i), sizeof(double) * C);
    }
    return p;
}

void check_kernel(const Kernel& k, const char* where) {
    if (k.size() <= 0) throw std::invalid_argument(std::string(where) + ": empty kernel");
}

void check_stride(StrideSpec s, const char* where) {
    if (s.row <= 0 || s.col <= 0)
        throw std::invalid_argument(std::string(where) + ": strides must be positive");
}

// Padding-free 3x3 path: boundary rows borrow a shared zero row, boundary
// columns are peeled off the vectorized interior loop. Requires C >= 2.
void conv_same_3x3(const GridField& f, const Kernel& k, GridField& out) {
    static thread_local std::vector<double> zero_row;
    const int R = f.rows(), C = f.cols();
    if (zero_row.size() < std::size_t(C)) zero_row.assign(C, 0.0);
    const double* z = zero_row.data();
    const double k00 = k(0, 0), k01 = k(0, 1), k02 = k(0, 2);
    const double k10 = k(1, 0), k11 = k(1, 1), k12 = k(1, 2);
    const double k20 = k(2, 0), k21 = k(2, 1), k22 = k(2, 2);
    for (int i = 0; i < R; ++i) {
        const double* a = i > 0 ? f.row(i - 1) : z;
        const double* b = f.row(i);
        const double* c = i < R - 1 ? f.row(i + 1) : z;
        double* o = out.row(i);
        o[0] = k01 * a[0] + k02 * a[1] + k11 * b[0] + k12 * b[1] + k21 * c[0] + k22 * c[1];
        for (int j = 1; j < C - 1; ++j) {
            o[j] = k00 * a[j - 1] + k01 * a[j] + k02 * a[j + 1] +
                   k10 * b[j - 1] + k11 * b[j] + k12 * b[j + 1] +
                   k20 * c[j - 1] + k21 * c[j] + k22 * c[j + 1];
        }
        o[C - 1] = k00 * a[C - 2] + k01 * a[C - 1] + k10 * b[C - 2] + k11 * b[C - 1] +
                   k20 * c[C - 2] + k21 * c[C - 1];
    }
}

void conv_same_generic(const GridField& f, const Kernel& k, GridField& out) {
    static thread_local std::vector<double> scratch;
    const int r = k.radius(), K = k.size();
    int PC = 0;
    const double* pad = padded_copy(f, r, PC, scratch);
    const int R = f.rows(), C = f.cols();
    for (int i = 0; i < R; ++i) {
        double* o = out.row(i);
        std::memset(o, 0, sizeof(double) * C);
        for (int p = 0; p < K; ++p) {
            const double* src = pad + std::size_t(i + p) * PC;
            for (int q = 0; q < K; ++q) {
                const double kv = k(p, q);
                if (kv == 0.0) continue;
                const double* s = src + q;
                for (int j = 0; j < C; ++j) o[j] += kv * s[j];
            }
        }
    }
}

// Strided 3x3 gather for odd input sides; windows stay inside the grid.
void conv_down_3x3_s2_odd(const GridField& f, const Kernel& k, GridField& out) {
    const int mR = out.rows(), mC = out.cols();
    const double k00 = k(0, 0), k01 = k(0, 1), k02 = k(0, 2);
    const double k10 = k(1, 0), k11 = k(1, 1), k12 = k(1, 2);
    const double k20 = k(2, 0), k21 = k(2, 1), k22 = k(2, 2);
    for (int I = 0; I < mR; ++I) {
        const double* a = f.row(2 * I);
        const double* b = f.row(2 * I + 1);
        const double* c = f.row(2 * I + 2);
        double* o = out.row(I);
        for (int J = 0; J < mC; ++J) {
            const int y = 2 * J;
            o[J] = k00 * a[y] + k01 * a[y + 1] + k02 * a[y + 2] +
                   k10 * b[y] + k11 * b[y + 1] + k12 * b[y + 2] +
                   k20 * c[y] + k21 * c[y + 1] + k22 * c[y + 2];
        }
    }
}

void conv_down_generic(const GridField& f, const Kernel& k, StrideSpec s, GridField& out) {
    static thread_local std::vector<double> scratch;
    const int r = k.radius(), K = k.size();
    int PC = 0;
    const double* pad = padded_copy(f, r, PC, scratch);
    const int mR = out.rows(), mC = out.cols();
    const int orow = s.row - 1, ocol = s.col - 1;
    for (int I = 0; I < mR; ++I) {
        double* o = out.row(I);
        for (int J = 0; J < mC; ++J) {
            double acc = 0.0;
            const int base_i = s.row * I + orow;
            const int base_j = s.col * J + ocol;
            for (int p = 0; p < K; ++p) {
                const double* src = pad + std::size_t(base_i + p) * PC + base_j;
                for (int q = 0; q < K; ++q) acc += k(p, q) * src[q];
            }
            o[J] = acc;
        }
    }
}

// Transposed 3x3 stride-2 gather for odd output sides (fine side 2m+1):
// odd fine indices read kernel row/col 1, even indices combine rows/cols 0, 2.
void conv_up_3x3_s2_odd(const GridField& g, const Kernel& k, GridField& out) {
    const int mR = g.rows(), mC = g.cols();
    const int outR = out.rows(), outC = out.cols();
    auto emit_row = [&](double* o, const double* gr, const double* kr, bool accumulate) {
        // even fine columns: y = 2J gets kr[0]*g[J] and kr[2]*g[J-1]
        if (accumulate) {
            o[0] += kr[0] * gr[0];
            for (int J = 1; J < mC; ++J) o[2 * J] += kr[0] * gr[J] + kr[2] * gr[J - 1];
            o[outC - 1] += kr[2] * gr[mC - 1];
            for (int J = 0; J < mC; ++J) o[2 * J + 1] += kr[1] * gr[J];
        } else {
            o[0] = kr[0] * gr[0];
            for (int J = 1; J < mC; ++J) o[2 * J] = kr[0] * gr[J] + kr[2] * gr[J - 1];
            o[outC - 1] = kr[2] * gr[mC - 1];
            for (int J = 0; J < mC; ++J) o[2 * J + 1] = kr[1] * gr[J];
        }
    };
    const double krow0[3] = {k(0, 0), k(0, 1), k(0, 2)};
    const double krow1[3] = {k(1, 0), k(1, 1), k(1, 2)};
    const double krow2[3] = {k(2, 0), k(2, 1), k(2, 2)};
    for (int x = 0; x < outR; ++x) {
        double* o = out.row(x);
        if (x & 1) {
            emit_row(o, g.row((x - 1) / 2), krow1, false);
        } else {
            bool wrote = false;
            if (x / 2 < mR) {
                emit_row(o, g.row(x / 2), krow0, false);
                wrote = true;
            }
            if (x / 2 - 1 >= 0) {
                emit_row(o, g.row(x / 2 - 1), krow2, wrote);
                wrote = true;
            }
            if (!wrote) std::memset(o, 0, sizeof(double) * outC);
        }
    }
}

void conv_up_generic(const GridField& g, const Kernel& k, StrideSpec s, GridField& out) {
    static thread_local std::vector<double> scratch;
    const int r = k.radius(), K = k.size();
    const int outR = out.rows(), outC = out.cols();
    const int PR = outR + 2 * r, PC = outC + 2 * r;
    if (scratch.size() < std::size_t(PR) * PC) scratch.resize(std::size_t(PR) * PC);
    std::fill(scratch.begin(), scratch.begin() + std::size_t(PR) * PC, 0.0);
    double* acc = scratch.data();
    const int orow = s.row - 1, ocol = s.col - 1;
    const int mR = g.rows(), mC = g.cols();
    for (int I = 0; I < mR; ++I) {
        const double* gr = g.row(I);
        for (int J = 0; J < mC; ++J) {
            const double v = gr[J];
            double* base = acc + std::size_t(s.row * I + orow) * PC + (s.col * J + ocol);
            for (int p = 0; p < K; ++p)
                for (int q = 0; q < K; ++q) base[std::size_t(p) * PC + q] += k(p, q) * v;
        }
    }
    for (int i = 0; i < outR; ++i)
        std::memcpy(out.row(i), acc + std::size_t(i + r) * PC + r, sizeof(double) * outC);
}

}  // namespace

int conv_down_extent(int n, int stride) {
    const int offset = stride - 1;
    if (n <= offset) return 0;
    return (n - 1 - offset) / stride + 1;
}

GridField conv_same(const GridField& f, const Kernel& k) {
    check_kernel(k, "conv_same");
    GridField out = GridField::uninitialized(f.rows(), f.cols());
    if (k.size() == 3 && f.cols() >= 2)
        conv_same_3x3(f, k, out);
    else
        conv_same_generic(f, k, out);
    return out;
}

GridField conv_down(const GridField& f, const Kernel& k, StrideSpec s) {
    check_kernel(k, "conv_down");
    check_stride(s, "conv_down");
    const int mR = conv_down_extent(f.rows(), s.row);
    const int mC = conv_down_extent(f.cols(), s.col);
    if (mR <= 0 || mC <= 0) throw std::invalid_argument("conv_down: output would be empty");
    GridField out = GridField::uninitialized(mR, mC);
    if (k.size() == 3 && s.row == 2 && s.col == 2 && f.rows() % 2 == 1 && f.cols() % 2 == 1)
        conv_down_3x3_s2_odd(f, k, out);
    else
        conv_down_generic(f, k, s, out);
    return out;
}

GridField conv_up(const GridField& g, const Kernel& k, StrideSpec s, int out_rows, int out_cols) {
    check_kernel(k, "conv_up");
    check_stride(s, "conv_up");
    if (conv_down_extent(out_rows, s.row) != g.rows() ||
        conv_down_extent(out_cols, s.col) != g.cols())
        throw std::invalid_argument("conv_up: output shape does not coarsen to input shape");
    GridField out = GridField::uninitialized(out_rows, out_cols);
    if (k.size() == 3 && s.row == 2 && s.col == 2 && out_rows == 2 * g.rows() + 1 &&
        out_cols == 2 * g.cols() + 1)
        conv_up_3x3_s2_odd(g, k, out);
    else
        conv_up_generic(g, k, s, out);
    return out;
}

GridField conv_same_adjoint_field(const GridField& ybar, const Kernel& k) {
    return conv_same(ybar, k.rotated180());
}

Kernel conv_same_kernel_grad(const GridField& ybar, const GridField& f, int kernel_size) {
    require_same_shape(ybar, f, "conv_same_kernel_grad");
    static thread_local std::vector<double> scratch;
    Kernel grad(kernel_size);
    const int r = grad.radius(), K = kernel_size;
    int PC = 0;
    const double* pad = padded_copy(f, r, PC, scratch);
    const int R = ybar.rows(), C = ybar.cols();
    for (int p = 0; p < K; ++p) {
        for (int q = 0; q < K; ++q) {
            double acc = 0.0;
            for (int i = 0; i < R; ++i) {
                const double* yb = ybar.row(i);
                const double* src = pad + std::size_t(i + p) * PC + q;
                for (int j = 0; j < C; ++j) acc += yb[j] * src[j];
            }
            grad(p, q) = acc;
        }
    }
    return grad;
}

GridField conv_down_adjoint_field(const GridField& ybar, const Kernel& k, StrideSpec s,
                                  int in_rows, int in_cols) {
    return conv_up(ybar, k, s, in_rows, in_cols);
}

Kernel conv_down_kernel_grad(const GridField& ybar, const GridField& f, StrideSpec s,
                             int kernel_size) {
    check_stride(s, "conv_down_kernel_grad");
    if (conv_down_extent(f.rows(), s.row) != ybar.rows() ||
        conv_down_extent(f.cols(), s.col) != ybar.cols())
        throw std::invalid_argument("conv_down_kernel_grad: shape mismatch");
    static thread_local std::vector<double> scratch;
    Kernel grad(kernel_size);
    const int r = grad.radius(), K = kernel_size;
    int PC = 0;
    const double* pad = padded_copy(f, r, PC, scratch);
    const int mR = ybar.rows(), mC = ybar.cols();
    const int orow = s.row - 1, ocol = s.col - 1;
    for (int p = 0; p < K; ++p) {
        for (int q = 0; q < K; ++q) {
            double acc = 0.0;
            for (int I = 0; I < mR; ++I) {
                const double* yb = ybar.row(I);
                const double* src = pad + std::size_t(s.row * I + orow + p) * PC + ocol + q;
                for (int J = 0; J < mC; ++J) acc += yb[J] * src[std::size_t(s.col) * J];
            }
            grad(p, q) = acc;
        }
    }
    return grad;
}

GridField conv_up_adjoint_field(const GridField& ybar, const Kernel& k, StrideSpec s) {
    return conv_down(ybar, k, s);
}

Kernel conv_up_kernel_grad(const GridField& ybar, const GridField& g, StrideSpec s,
                           int kernel_size) {
    // <conv_up(g,k), ybar> correlates g against ybar exactly as
    // conv_down_kernel_grad correlates its output cotangent against its input.
    return conv_down_kernel_grad(g, ybar, s, kernel_size);
}

}  // namespace convmg
