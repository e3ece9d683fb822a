#pragma once

#include <optional>
#include <string>
#include <vector>

#include "convmg/problem.hpp"

namespace convmg {

enum class ModelKind { LMG, S1MG_RS, S1MG_S, S3MG_S, UNET, FMG };

std::string model_name(ModelKind kind);
ModelKind model_by_name(const std::string& name);
const std::vector<ModelKind>& all_model_kinds();
bool model_trainable(ModelKind kind);

/// Kinds whose layer parameters are shared, so the network can be rebuilt
/// at any depth without new weights.
bool model_serializable(ModelKind kind);

/// Central kernel storage. Levels reference kernels by index, so shared
/// (serialized) parameters have exactly one owner and gradient
/// contributions from every site of use accumulate per index.
struct ParamStore {
    std::vector<Kernel> kernels;
    std::vector<std::string> names;
    std::vector<bool> trainable;

    int add(const std::string& name, Kernel k, bool is_trainable);
    int index_of(const std::string& name) const;  // -1 when absent
    std::vector<int> trainable_indices() const;
};

/// Per-level parameters of one two-grid layer.
struct LevelParams {
    int restriction = -1;                 // 3x3 transfer kernel index
    std::vector<int> smoothers;           // D+1 smoothing kernel indices
    StrideSpec stride{2, 2};
    std::optional<GridField> diag_scale;  // per-entry D(A_k)^{-1}
};

struct CoarseSolver {
    enum class Type {
        ExactScalar,  // 1x1 coarse grid, divide by the scalar operator
        ConvPair      // two stride-1 convolutions
    };
    Type type = Type::ExactScalar;
    int k1 = -1;
    int k2 = -1;
};

/// A multigrid solver expressed as a linear convolutional network: the N of
/// x <- x + N(b - Ax). Immutable during application; training mutates
/// kernels between evaluations and calls prepare() afterwards.
class MgNetwork {
public:
    ModelKind kind = ModelKind::LMG;
    ProblemSpec problem;
    int J = 0;          // fine grid has side 2^J - 1
    int trained_J = 0;  // depth the kernels were built or trained at
    ParamStore params;
    std::vector<LevelParams> levels;  // fine -> coarse
    CoarseSolver coarse;
    int pre_sweeps = 2;
    int post_sweeps = 2;

    int num_levels() const { return static_cast<int>(levels.size()); }
    int fine_side() const { return grid_side(J); }

    /// Grid side at a level, 1-based; level num_levels()+1 is the coarsest
    /// grid below the last two-grid layer.
    int side_at(int level) const;

    const Kernel& kernel_at(int idx) const { return params.kernels[idx]; }

    void validate() const;

    /// Recomputes cached values derived from current kernel values (the
    /// exact coarse-grid scalar). Must be called after kernel updates.
    void prepare();
    bool prepared() const { return coarse.type != CoarseSolver::Type::ExactScalar || coarse_scalar_.has_value(); }
    double coarse_scalar() const;

    /// A_k x computed matrix-free: transposed convolutions up to the fine
    /// grid, one stencil application, convolutions back down. Level 1 is
    /// the fine operator itself.
    GridField apply_level(int level, const GridField& x) const;

    /// Polynomial smoothing sweeps: per sweep, r <- b - A_k x, then
    /// x <- x + diag_scale .* conv(r, w_i) and r <- A_k r for each kernel.
    GridField smooth(int level, GridField x, const GridField& b, int sweeps) const;

    /// Recursive two-grid cycle: pre-smooth, restrict the residual, solve
    /// coarse (recursively or exactly), correct, post-smooth.
    GridField vcycle(int level, GridField x, const GridField& b) const;

    /// N r: a V-cycle from the zero initial guess (the U-Net model applies
    /// its network directly instead).
    GridField apply_n(const GridField& r) const;

    /// (I - NA) z, the error-propagation operator.
    GridField apply_error_propagation(const GridField& z) const;

    GridField coarse_solve(const GridField& rc) const;

    GridField unet_apply(const GridField& u) const;

private:
    GridField vcycle_impl(int level, GridField x, const GridField& b, bool x_is_zero) const;
    GridField smooth_impl(int level, GridField x, const GridField& b, int sweeps,
                          bool x_is_zero) const;
    GridField unet_layer(int layer, const GridField& u) const;

    std::optional<double> coarse_scalar_;
};

/// Exact per-entry diagonal of the level operator, obtained matrix-free by
/// probing with indicator combs whose stride exceeds the accumulated
/// stencil radius; returns the elementwise reciprocal.
GridField compute_diag_scale(const MgNetwork& net, int level);

MgNetwork build_model(ModelKind kind, int J, const ProblemSpec& problem);

/// Extends a trained network to a deeper grid following the kind's
/// parameter-sharing rule; trained kernel values are referenced untouched,
/// per-level diagonals are recomputed. Fixed-size kinds (UNET, FMG) reject
/// this call -- they are evaluated at larger J unchanged.
MgNetwork serialize_to_depth(const MgNetwork& net, int J_new);

/// Evaluation-time rebuild at an arbitrary depth J_new >= 2: serialized
/// kinds follow their sharing rule; UNET and FMG keep their fixed layer
/// count (attached finest-first, truncated when the grid is too shallow).
MgNetwork instantiate_at(const MgNetwork& net, int J_new);

}  // namespace convmg
