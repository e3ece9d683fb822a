#include "convmg/gradient.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace convmg {

namespace {

// Frames record exactly the intermediates the backward pass needs: the
// input field of every convolution whose kernel gradient may be required.
// Field cotangents never need saved values because every op is linear.

struct ChainFrame {
    int level = 1;
    std::vector<GridField> up_inputs;    // inputs to conv_up, levels k-1 .. 1
    std::vector<GridField> down_inputs;  // inputs to conv_down, levels 1 .. k-1
};

struct SweepFrame {
    bool x_was_zero = false;
    ChainFrame residual_chain;           // for r0 = b - A x (absent when x was zero)
    std::vector<GridField> conv_inputs;  // r_i, input of smoothing conv i
    std::vector<ChainFrame> r_chains;    // r_{i+1} = A r_i
};

struct SmoothFrame {
    int level = 1;
    std::vector<SweepFrame> sweeps;
};

struct VcycleFrame;

struct CoarseFrame {
    GridField ec;        // ExactScalar: saved output, for the scalar cotangent
    GridField in1, in2;  // ConvPair: inputs of the two convolutions
};

struct VcycleFrame {
    int level = 1;
    bool entered_zero = false;  // x identically zero at entry
    bool still_zero = false;    // still zero after pre-smoothing
    SmoothFrame pre, post;
    ChainFrame residual_chain;
    GridField restrict_input;  // r
    GridField prolong_input;   // ec
    std::unique_ptr<VcycleFrame> child;
    CoarseFrame coarse;
};

struct UnetLayerFrame {
    GridField in;        // u, input of the layer (skip source, first conv input)
    GridField down_in;   // v, input of the strided conv
    GridField up_in;     // e, input of the transposed conv
    GridField smooth_in; // up, input of the ascending conv
    // bottom block
    GridField bottom_in, bottom_mid;
};

struct ErrorPropFrame {
    // out = z - N(A z); the fine stencil is fixed, so only N needs a frame
    std::unique_ptr<VcycleFrame> cycle;
    std::vector<UnetLayerFrame> unet;  // outer layers then bottom
};

class GradEngine {
public:
    GradEngine(const MgNetwork& net, const LossConfig& cfg) : net_(net), cfg_(cfg) {
        grads_.assign(net.params.kernels.size(), Kernel{});
        for (std::size_t i = 0; i < grads_.size(); ++i)
            grads_[i] = Kernel(net.params.kernels[i].size());
    }

    LossAndGrad run();

private:
    const MgNetwork& net_;
    const LossConfig& cfg_;
    std::vector<Kernel> grads_;
    double coarse_scalar_ = 0.0;
    double coarse_scalar_bar_ = 0.0;
    ChainFrame coarse_scalar_chain_;
    bool coarse_scalar_trainable_ = false;

    const Kernel& kernel(int idx) const { return net_.params.kernels[idx]; }
    bool trainable(int idx) const { return net_.params.trainable[idx]; }

    void add_grad(int idx, const Kernel& g) {
        if (!trainable(idx)) return;
        Kernel& acc = grads_[idx];
        for (int p = 0; p < acc.size(); ++p)
            for (int q = 0; q < acc.size(); ++q) acc(p, q) += g(p, q);
    }

    // --- apply_level -------------------------------------------------------
    GridField chain_fwd(int level, const GridField& x, ChainFrame& frame) {
        frame.level = level;
        frame.up_inputs.clear();
        frame.down_inputs.clear();
        if (level == 1) return apply_fine_operator(net_.problem, x);
        GridField t = x;
        for (int l = level - 1; l >= 1; --l) {
            const LevelParams& lp = net_.levels[l - 1];
            frame.up_inputs.push_back(t);
            t = conv_up(t, kernel(lp.restriction), lp.stride, net_.side_at(l), net_.side_at(l));
        }
        t = apply_fine_operator(net_.problem, t);
        for (int l = 1; l <= level - 1; ++l) {
            const LevelParams& lp = net_.levels[l - 1];
            frame.down_inputs.push_back(t);
            t = conv_down(t, kernel(lp.restriction), lp.stride);
        }
        return t;
    }

    GridField chain_bwd(const ChainFrame& frame, const GridField& obar) {
        const int level = frame.level;
        if (level == 1) return conv_same_adjoint_field(obar, net_.problem.stencil);
        GridField t = obar;
        for (int l = level - 1; l >= 1; --l) {
            const LevelParams& lp = net_.levels[l - 1];
            add_grad(lp.restriction,
                     conv_down_kernel_grad(t, frame.down_inputs[l - 1], lp.stride,
                                           kernel(lp.restriction).size()));
            t = conv_up(t, kernel(lp.restriction), lp.stride, net_.side_at(l), net_.side_at(l));
        }
        t = conv_same_adjoint_field(t, net_.problem.stencil);
        for (int l = 1; l <= level - 1; ++l) {
            const LevelParams& lp = net_.levels[l - 1];
            // up_inputs stores inputs for l = level-1 .. 1
            const GridField& up_in = frame.up_inputs[level - 1 - l];
            add_grad(lp.restriction,
                     conv_up_kernel_grad(t, up_in, lp.stride, kernel(lp.restriction).size()));
            t = conv_down(t, kernel(lp.restriction), lp.stride);
        }
        return t;
    }

    // --- smoothing ---------------------------------------------------------
    GridField smooth_fwd(int level, GridField x, const GridField& b, int sweeps, bool x_is_zero,
                         SmoothFrame& frame) {
        frame.level = level;
        frame.sweeps.clear();
        const LevelParams& lp = net_.levels[level - 1];
        const int terms = static_cast<int>(lp.smoothers.size());
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            SweepFrame sf;
            sf.x_was_zero = x_is_zero;
            GridField r = x_is_zero ? b : axpy(1.0, b, -1.0, chain_fwd(level, x, sf.residual_chain));
            for (int i = 0; i < terms; ++i) {
                sf.conv_inputs.push_back(r);
                GridField c = conv_same(r, kernel(lp.smoothers[i]));
                if (lp.diag_scale) hadamard_in_place(c, *lp.diag_scale);
                if (x_is_zero) {
                    x = std::move(c);
                    x_is_zero = false;
                } else {
                    add_scaled(x, 1.0, c);
                }
                if (i + 1 < terms) {
                    sf.r_chains.emplace_back();
                    r = chain_fwd(level, r, sf.r_chains.back());
                }
            }
            frame.sweeps.push_back(std::move(sf));
        }
        return x;
    }

    // Returns the cotangent of the sweep-0 input x (unused when the input
    // was the constant zero field) and accumulates into bbar.
    GridField smooth_bwd(const SmoothFrame& frame, GridField xbar, GridField& bbar) {
        const LevelParams& lp = net_.levels[frame.level - 1];
        const int terms = static_cast<int>(lp.smoothers.size());
        for (int s = static_cast<int>(frame.sweeps.size()) - 1; s >= 0; --s) {
            const SweepFrame& sf = frame.sweeps[s];
            GridField rbar;  // cotangent of r_i while walking i backwards
            for (int i = terms - 1; i >= 0; --i) {
                GridField cbar = lp.diag_scale ? hadamard(xbar, *lp.diag_scale) : xbar;
                add_grad(lp.smoothers[i], conv_same_kernel_grad(cbar, sf.conv_inputs[i],
                                                                kernel(lp.smoothers[i]).size()));
                GridField wadj = conv_same_adjoint_field(cbar, kernel(lp.smoothers[i]));
                if (i == terms - 1) {
                    rbar = std::move(wadj);
                } else {
                    rbar = axpy(1.0, wadj, 1.0, chain_bwd(sf.r_chains[i], rbar));
                }
            }
            bbar = bbar.empty() ? rbar : axpy(1.0, bbar, 1.0, rbar);
            if (!sf.x_was_zero) {
                // r = b - A x: the chain receives the negated cotangent so
                // kernel gradients inside it carry the right sign
                GridField neg_rbar = axpy(-1.0, rbar, 0.0, rbar);
                xbar = axpy(1.0, xbar, 1.0, chain_bwd(sf.residual_chain, neg_rbar));
            } else {
                // input x was the constant zero field; nothing flows back
                return GridField(xbar.rows(), xbar.cols());
            }
        }
        return xbar;
    }

    // --- coarse solve ------------------------------------------------------
    GridField coarse_fwd(const GridField& rc, CoarseFrame& frame) {
        if (net_.coarse.type == CoarseSolver::Type::ExactScalar) {
            GridField e = rc;
            e(0, 0) /= coarse_scalar_;
            frame.ec = e;
            return e;
        }
        frame.in1 = rc;
        GridField mid = conv_same(rc, kernel(net_.coarse.k1));
        frame.in2 = mid;
        return conv_same(mid, kernel(net_.coarse.k2));
    }

    GridField coarse_bwd(const CoarseFrame& frame, const GridField& ecbar) {
        if (net_.coarse.type == CoarseSolver::Type::ExactScalar) {
            if (coarse_scalar_trainable_)
                coarse_scalar_bar_ -= dot(ecbar, frame.ec) / coarse_scalar_;
            GridField rcbar = ecbar;
            rcbar(0, 0) /= coarse_scalar_;
            return rcbar;
        }
        const Kernel& k1 = kernel(net_.coarse.k1);
        const Kernel& k2 = kernel(net_.coarse.k2);
        add_grad(net_.coarse.k2, conv_same_kernel_grad(ecbar, frame.in2, k2.size()));
        GridField midbar = conv_same_adjoint_field(ecbar, k2);
        add_grad(net_.coarse.k1, conv_same_kernel_grad(midbar, frame.in1, k1.size()));
        return conv_same_adjoint_field(midbar, k1);
    }

    // --- V-cycle -----------------------------------------------------------
    GridField vcycle_fwd(int level, GridField x, const GridField& b, bool x_is_zero,
                         VcycleFrame& frame) {
        frame.level = level;
        frame.entered_zero = x_is_zero;
        const LevelParams& lp = net_.levels[level - 1];
        x = smooth_fwd(level, std::move(x), b, net_.pre_sweeps, x_is_zero, frame.pre);
        frame.still_zero = x_is_zero && net_.pre_sweeps == 0;
        GridField r = frame.still_zero
                          ? b
                          : axpy(1.0, b, -1.0, chain_fwd(level, x, frame.residual_chain));
        frame.restrict_input = r;
        GridField rc = conv_down(r, kernel(lp.restriction), lp.stride);
        GridField ec;
        if (level == net_.num_levels()) {
            ec = coarse_fwd(rc, frame.coarse);
        } else {
            frame.child = std::make_unique<VcycleFrame>();
            GridField zero(rc.rows(), rc.cols());
            ec = vcycle_fwd(level + 1, std::move(zero), rc, true, *frame.child);
        }
        frame.prolong_input = ec;
        GridField corr =
            conv_up(ec, kernel(lp.restriction), lp.stride, net_.side_at(level), net_.side_at(level));
        if (frame.still_zero)
            x = std::move(corr);
        else
            add_scaled(x, 1.0, corr);
        return smooth_fwd(level, std::move(x), b, net_.post_sweeps, false, frame.post);
    }

    // Returns (discarded when entered_zero) the cotangent of the entry x and
    // accumulates the cotangent of b.
    GridField vcycle_bwd(const VcycleFrame& frame, GridField xbar, GridField& bbar) {
        const LevelParams& lp = net_.levels[frame.level - 1];
        GridField x2bar = smooth_bwd(frame.post, std::move(xbar), bbar);
        // correction: x2 = x1 + conv_up(ec, w)
        add_grad(lp.restriction, conv_up_kernel_grad(x2bar, frame.prolong_input, lp.stride,
                                                     kernel(lp.restriction).size()));
        GridField ecbar = conv_up_adjoint_field(x2bar, kernel(lp.restriction), lp.stride);
        GridField rcbar;
        if (frame.child) {
            // ecbar is the cotangent of the child's output; its entry x was
            // the constant zero field, so only the rhs cotangent flows back
            GridField child_bbar;
            vcycle_bwd(*frame.child, std::move(ecbar), child_bbar);
            rcbar = std::move(child_bbar);
        } else {
            rcbar = coarse_bwd(frame.coarse, ecbar);
        }
        // restriction: rc = conv_down(r, w)
        add_grad(lp.restriction, conv_down_kernel_grad(rcbar, frame.restrict_input, lp.stride,
                                                       kernel(lp.restriction).size()));
        GridField rbar =
            conv_down_adjoint_field(rcbar, kernel(lp.restriction), lp.stride,
                                    net_.side_at(frame.level), net_.side_at(frame.level));
        // residual: r = b - A x1
        bbar = bbar.empty() ? rbar : axpy(1.0, bbar, 1.0, rbar);
        if (!frame.still_zero) {
            GridField neg_rbar = axpy(-1.0, rbar, 0.0, rbar);
            GridField x1bar = axpy(1.0, x2bar, 1.0, chain_bwd(frame.residual_chain, neg_rbar));
            return smooth_bwd(frame.pre, std::move(x1bar), bbar);
        }
        return GridField(x2bar.rows(), x2bar.cols());
    }

    // --- U-Net -------------------------------------------------------------
    GridField unet_fwd(int layer, const GridField& u, std::vector<UnetLayerFrame>& frames) {
        UnetLayerFrame& f = frames[layer - 1];
        if (layer == net_.num_levels() + 1) {
            const Kernel& kb = kernel(net_.coarse.k1);
            f.bottom_in = u;
            GridField mid = conv_same(u, kb);
            f.bottom_mid = mid;
            GridField t = conv_same(mid, kb);
            add_scaled(t, 1.0, u);
            return t;
        }
        const LevelParams& lp = net_.levels[layer - 1];
        f.in = u;
        GridField v = conv_same(u, kernel(lp.smoothers[0]));
        f.down_in = v;
        GridField d = conv_down(v, kernel(lp.restriction), lp.stride);
        GridField e = unet_fwd(layer + 1, d, frames);
        f.up_in = e;
        GridField up =
            conv_up(e, kernel(lp.restriction), lp.stride, net_.side_at(layer), net_.side_at(layer));
        f.smooth_in = up;
        GridField out = conv_same(up, kernel(lp.smoothers[0]));
        add_scaled(out, 1.0, u);
        return out;
    }

    GridField unet_bwd(int layer, const std::vector<UnetLayerFrame>& frames,
                       const GridField& obar) {
        const UnetLayerFrame& f = frames[layer - 1];
        if (layer == net_.num_levels() + 1) {
            const Kernel& kb = kernel(net_.coarse.k1);
            add_grad(net_.coarse.k1, conv_same_kernel_grad(obar, f.bottom_mid, kb.size()));
            GridField midbar = conv_same_adjoint_field(obar, kb);
            add_grad(net_.coarse.k1, conv_same_kernel_grad(midbar, f.bottom_in, kb.size()));
            return axpy(1.0, obar, 1.0, conv_same_adjoint_field(midbar, kb));
        }
        const LevelParams& lp = net_.levels[layer - 1];
        const Kernel& sk = kernel(lp.smoothers[0]);
        add_grad(lp.smoothers[0], conv_same_kernel_grad(obar, f.smooth_in, sk.size()));
        GridField upbar = conv_same_adjoint_field(obar, sk);
        add_grad(lp.restriction,
                 conv_up_kernel_grad(upbar, f.up_in, lp.stride, kernel(lp.restriction).size()));
        GridField ebar = conv_up_adjoint_field(upbar, kernel(lp.restriction), lp.stride);
        GridField dbar = unet_bwd(layer + 1, frames, ebar);
        add_grad(lp.restriction, conv_down_kernel_grad(dbar, f.down_in, lp.stride,
                                                       kernel(lp.restriction).size()));
        GridField vbar = conv_down_adjoint_field(dbar, kernel(lp.restriction), lp.stride,
                                                 net_.side_at(layer), net_.side_at(layer));
        add_grad(lp.smoothers[0], conv_same_kernel_grad(vbar, f.in, sk.size()));
        GridField ubar = conv_same_adjoint_field(vbar, sk);
        return axpy(1.0, ubar, 1.0, obar);  // skip connection
    }

    // --- error propagation ------------------------------------------------
    GridField errorprop_fwd(const GridField& z, ErrorPropFrame& frame) {
        GridField a = apply_fine_operator(net_.problem, z);
        GridField nz;
        if (net_.kind == ModelKind::UNET) {
            frame.unet.assign(net_.num_levels() + 1, UnetLayerFrame{});
            nz = unet_fwd(1, a, frame.unet);
        } else {
            frame.cycle = std::make_unique<VcycleFrame>();
            GridField zero(a.rows(), a.cols());
            nz = vcycle_fwd(1, std::move(zero), a, true, *frame.cycle);
        }
        return axpy(1.0, z, -1.0, nz);
    }

    GridField errorprop_bwd(const ErrorPropFrame& frame, const GridField& obar) {
        GridField nbar = axpy(-1.0, obar, 0.0, obar);
        GridField abar;
        if (net_.kind == ModelKind::UNET) {
            abar = unet_bwd(1, frame.unet, nbar);
        } else {
            vcycle_bwd(*frame.cycle, std::move(nbar), abar);
        }
        return axpy(1.0, obar, 1.0, conv_same_adjoint_field(abar, net_.problem.stencil));
    }
};

LossAndGrad GradEngine::run() {
    LossAndGrad out;
    out.grads = grads_;

    // the exact coarse-grid scalar, computed once per loss evaluation and
    // differentiable when the restriction chain is trainable
    if (net_.coarse.type == CoarseSolver::Type::ExactScalar) {
        GridField unit = GridField::constant(1, 1, 1.0);
        GridField a = chain_fwd(net_.num_levels() + 1, unit, coarse_scalar_chain_);
        coarse_scalar_ = a(0, 0);
        coarse_scalar_trainable_ = false;
        for (const auto& lvl : net_.levels)
            if (trainable(lvl.restriction)) coarse_scalar_trainable_ = true;
    }

    const int n = net_.fine_side();
    RademacherBatch batch = sample_rademacher(n, n, cfg_.n_batch, cfg_.seed);

    std::vector<std::vector<ErrorPropFrame>> frames(cfg_.n_batch);
    std::vector<GridField> finals(cfg_.n_batch);
    double sum = 0.0;
    for (int j = 0; j < cfg_.n_batch; ++j) {
        GridField y = batch.vectors[j];
        frames[j].resize(cfg_.power_k);
        for (int t = 0; t < cfg_.power_k; ++t) y = errorprop_fwd(y, frames[j][t]);
        const double ns = dot(y, y);
        if (!std::isfinite(ns)) {
            out.value = std::numeric_limits<double>::infinity();
            out.finite = false;
            return out;
        }
        finals[j] = std::move(y);
        sum += ns;
    }
    const double rho = sum == 0.0 ? 0.0 : std::pow(sum / cfg_.n_batch, 1.0 / (2.0 * cfg_.power_k));
    out.value = rho;
    if (sum == 0.0) {  // at the global minimum; zero is a valid subgradient
        out.finite = true;
        return out;
    }

    // d rho / d s_j = rho / (2k S), d s_j / d y_j = 2 y_j
    const double scale = rho / (cfg_.power_k * sum);
    for (int j = 0; j < cfg_.n_batch; ++j) {
        GridField ybar = axpy(scale, finals[j], 0.0, finals[j]);
        for (int t = cfg_.power_k - 1; t >= 0; --t) ybar = errorprop_bwd(frames[j][t], ybar);
    }
    if (coarse_scalar_trainable_ && coarse_scalar_bar_ != 0.0) {
        GridField abar = GridField::constant(1, 1, coarse_scalar_bar_);
        chain_bwd(coarse_scalar_chain_, abar);
    }

    out.grads = grads_;
    out.finite = true;
    for (const Kernel& g : out.grads)
        if (!g.all_finite()) {
            out.finite = false;
            break;
        }
    return out;
}

}  // namespace

LossAndGrad loss_and_gradient(const MgNetwork& net, const LossConfig& cfg) {
    if (net.params.trainable_indices().empty())
        throw std::invalid_argument("loss_and_gradient: network has no trainable kernels");
    GradEngine engine(net, cfg);
    return engine.run();
}

}  // namespace convmg
