#pragma once

#include "convmg/field.hpp"
#include "convmg/kernel.hpp"

namespace convmg {

/// Output side length of a strided convolution over n samples with the
/// vertex-centered offset (stride - 1); 0 means the output would be empty.
int conv_down_extent(int n, int stride);

/// Same-size convolution with zero padding of width radius on all sides:
///   out(i,j) = sum_{p,q} k(p,q) * f(i + p - r, j + q - r),   f = 0 outside.
GridField conv_same(const GridField& f, const Kernel& k);

/// Strided (restriction) convolution. With stride 2 and a 3x3 kernel the
/// output samples the same-size convolution at fine indices (2I+1, 2J+1),
/// so coarse points coincide with odd fine points:
///   out(I,J) = sum_{p,q} k(p,q) * f(s_r*I + s_r-1 + p - r, s_c*J + s_c-1 + q - r).
/// Maps a (2^J-1)^2 field to (2^{J-1}-1)^2. Throws if the output is empty.
GridField conv_down(const GridField& f, const Kernel& k, StrideSpec s);

/// Transposed (prolongation) convolution: the exact adjoint of conv_down,
///   <conv_down(x,k,s), y> = <x, conv_up(y,k,s,out_rows,out_cols)>.
/// out_rows/out_cols must be a fine shape whose coarsening matches g.
GridField conv_up(const GridField& g, const Kernel& k, StrideSpec s, int out_rows, int out_cols);

// Reverse-mode building blocks. Contracts are the transpose identities
//   <Op(f,k), ybar> = <f, Op_field*(ybar,k)> = <vec k, Op_kernel*(ybar,f)>.

/// Cotangent of conv_same with respect to its field input; equals
/// conv_same with the kernel rotated 180 degrees.
GridField conv_same_adjoint_field(const GridField& ybar, const Kernel& k);

/// Cotangent of conv_same with respect to the kernel: correlation of the
/// input field with the output cotangent, accumulated entrywise.
Kernel conv_same_kernel_grad(const GridField& ybar, const GridField& f, int kernel_size);

GridField conv_down_adjoint_field(const GridField& ybar, const Kernel& k, StrideSpec s,
                                  int in_rows, int in_cols);
Kernel conv_down_kernel_grad(const GridField& ybar, const GridField& f, StrideSpec s,
                             int kernel_size);

GridField conv_up_adjoint_field(const GridField& ybar, const Kernel& k, StrideSpec s);
Kernel conv_up_kernel_grad(const GridField& ybar, const GridField& g, StrideSpec s,
                           int kernel_size);

}  // namespace convmg
