#include "convmg/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace convmg {

std::string model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::LMG: return "lmg";
        case ModelKind::S1MG_RS: return "s1mg_rs";
        case ModelKind::S1MG_S: return "s1mg_s";
        case ModelKind::S3MG_S: return "s3mg_s";
        case ModelKind::UNET: return "unet";
        case ModelKind::FMG: return "fmg";
    }
    throw std::invalid_argument("model_name: unknown kind");
}

ModelKind model_by_name(const std::string& name) {
    for (ModelKind kind : all_model_kinds())
        if (model_name(kind) == name) return kind;
    throw std::invalid_argument("unknown model name: " + name);
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> kinds = {ModelKind::LMG,    ModelKind::S1MG_RS,
                                                 ModelKind::S1MG_S, ModelKind::S3MG_S,
                                                 ModelKind::UNET,   ModelKind::FMG};
    return kinds;
}

bool model_trainable(ModelKind kind) { return kind != ModelKind::LMG; }

bool model_serializable(ModelKind kind) {
    return kind == ModelKind::LMG || kind == ModelKind::S1MG_RS || kind == ModelKind::S1MG_S ||
           kind == ModelKind::S3MG_S;
}

int ParamStore::add(const std::string& name, Kernel k, bool is_trainable) {
    kernels.push_back(std::move(k));
    names.push_back(name);
    trainable.push_back(is_trainable);
    return static_cast<int>(kernels.size()) - 1;
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

std::vector<int> ParamStore::trainable_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < trainable.size(); ++i)
        if (trainable[i]) out.push_back(static_cast<int>(i));
    return out;
}

int MgNetwork::side_at(int level) const {
    if (level < 1 || level > num_levels() + 1)
        throw std::invalid_argument("side_at: level out of range");
    int side = fine_side();
    for (int l = 1; l < level; ++l) side = (side - 1) / 2;
    return side;
}

void MgNetwork::validate() const {
    if (J < 2) throw std::invalid_argument("MgNetwork: J must be at least 2");
    if (levels.empty()) throw std::invalid_argument("MgNetwork: no levels");
    if (num_levels() > J - 1) throw std::invalid_argument("MgNetwork: too many levels for J");
    const int np = static_cast<int>(params.kernels.size());
    for (int l = 1; l <= num_levels(); ++l) {
        const LevelParams& lp = levels[l - 1];
        if (lp.restriction < 0 || lp.restriction >= np)
            throw std::invalid_argument("MgNetwork: restriction index out of range");
        if (lp.smoothers.empty()) throw std::invalid_argument("MgNetwork: smoothers empty");
        for (int s : lp.smoothers)
            if (s < 0 || s >= np) throw std::invalid_argument("MgNetwork: smoother index");
        if (lp.diag_scale) {
            const int side = side_at(l);
            if (lp.diag_scale->rows() != side || lp.diag_scale->cols() != side)
                throw std::invalid_argument("MgNetwork: diag_scale shape mismatch");
            for (int i = 0; i < side; ++i)
                for (int j = 0; j < side; ++j)
                    if (!((*lp.diag_scale)(i, j) > 0.0))
                        throw std::invalid_argument("MgNetwork: diag_scale not positive");
        }
    }
    if (coarse.type == CoarseSolver::Type::ExactScalar) {
        if (side_at(num_levels() + 1) != 1)
            throw std::invalid_argument("MgNetwork: exact coarse solve needs a 1x1 coarse grid");
    } else {
        if (coarse.k1 < 0 || coarse.k1 >= np || coarse.k2 < 0 || coarse.k2 >= np)
            throw std::invalid_argument("MgNetwork: coarse kernel index out of range");
    }
    for (const Kernel& k : params.kernels)
        if (!k.all_finite()) throw std::invalid_argument("MgNetwork: non-finite kernel");
}

void MgNetwork::prepare() {
    coarse_scalar_.reset();
    if (coarse.type == CoarseSolver::Type::ExactScalar) {
        const GridField unit = GridField::constant(1, 1, 1.0);
        const double a = apply_level(num_levels() + 1, unit)(0, 0);
        if (!std::isfinite(a) || a == 0.0)
            throw std::runtime_error("MgNetwork: degenerate coarse-grid scalar");
        coarse_scalar_ = a;
    }
}

double MgNetwork::coarse_scalar() const {
    if (!coarse_scalar_) throw std::logic_error("MgNetwork: prepare() has not run");
    return *coarse_scalar_;
}

GridField MgNetwork::apply_level(int level, const GridField& x) const {
    if (level < 1 || level > num_levels() + 1)
        throw std::invalid_argument("apply_level: level out of range");
    if (x.rows() != side_at(level) || x.cols() != side_at(level))
        throw std::invalid_argument("apply_level: shape mismatch");
    if (level == 1) return apply_fine_operator(problem, x);
    GridField t = x;
    for (int l = level - 1; l >= 1; --l) {
        const LevelParams& lp = levels[l - 1];
        t = conv_up(t, kernel_at(lp.restriction), lp.stride, side_at(l), side_at(l));
    }
    t = apply_fine_operator(problem, t);
    for (int l = 1; l <= level - 1; ++l) {
        const LevelParams& lp = levels[l - 1];
        t = conv_down(t, kernel_at(lp.restriction), lp.stride);
    }
    return t;
}

GridField MgNetwork::smooth_impl(int level, GridField x, const GridField& b, int sweeps,
                                 bool x_is_zero) const {
    const LevelParams& lp = levels[level - 1];
    const int terms = static_cast<int>(lp.smoothers.size());
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        GridField r = x_is_zero ? b : axpy(1.0, b, -1.0, apply_level(level, x));
        for (int i = 0; i < terms; ++i) {
            GridField c = conv_same(r, kernel_at(lp.smoothers[i]));
            if (lp.diag_scale) hadamard_in_place(c, *lp.diag_scale);
            if (x_is_zero) {
                x = std::move(c);
                x_is_zero = false;
            } else {
                add_scaled(x, 1.0, c);
            }
            if (i + 1 < terms) r = apply_level(level, r);
        }
    }
    return x;
}

GridField MgNetwork::smooth(int level, GridField x, const GridField& b, int sweeps) const {
    if (level < 1 || level > num_levels())
        throw std::invalid_argument("smooth: level out of range");
    require_same_shape(x, b, "smooth");
    if (x.rows() != side_at(level)) throw std::invalid_argument("smooth: wrong level shape");
    return smooth_impl(level, std::move(x), b, sweeps, false);
}

GridField MgNetwork::coarse_solve(const GridField& rc) const {
    if (coarse.type == CoarseSolver::Type::ExactScalar) {
        GridField e = rc;
        e(0, 0) /= coarse_scalar();
        return e;
    }
    return conv_same(conv_same(rc, kernel_at(coarse.k1)), kernel_at(coarse.k2));
}

GridField MgNetwork::vcycle_impl(int level, GridField x, const GridField& b,
                                 bool x_is_zero) const {
    const LevelParams& lp = levels[level - 1];
    x = smooth_impl(level, std::move(x), b, pre_sweeps, x_is_zero);
    const bool still_zero = x_is_zero && (pre_sweeps == 0 || lp.smoothers.empty());
    GridField r = still_zero ? b : axpy(1.0, b, -1.0, apply_level(level, x));
    GridField rc = conv_down(r, kernel_at(lp.restriction), lp.stride);
    GridField ec;
    if (level == num_levels()) {
        ec = coarse_solve(rc);
    } else {
        GridField zero(rc.rows(), rc.cols());
        ec = vcycle_impl(level + 1, std::move(zero), rc, /*x_is_zero=*/true);
    }
    GridField corr = conv_up(ec, kernel_at(lp.restriction), lp.stride, side_at(level), side_at(level));
    if (still_zero)
        x = std::move(corr);
    else
        add_scaled(x, 1.0, corr);
    return smooth_impl(level, std::move(x), b, post_sweeps, false);
}

GridField MgNetwork::vcycle(int level, GridField x, const GridField& b) const {
    if (kind == ModelKind::UNET)
        throw std::invalid_argument("vcycle: the U-Net model is applied directly as N");
    if (level < 1 || level > num_levels())
        throw std::invalid_argument("vcycle: level out of range");
    require_same_shape(x, b, "vcycle");
    if (x.rows() != side_at(level)) throw std::invalid_argument("vcycle: wrong level shape");
    return vcycle_impl(level, std::move(x), b, false);
}

GridField MgNetwork::apply_n(const GridField& r) const {
    if (r.rows() != fine_side() || r.cols() != fine_side())
        throw std::invalid_argument("apply_n: shape mismatch");
    if (kind == ModelKind::UNET) return unet_apply(r);
    GridField zero(r.rows(), r.cols());
    return vcycle_impl(1, std::move(zero), r, /*x_is_zero=*/true);
}

GridField MgNetwork::apply_error_propagation(const GridField& z) const {
    GridField nz = apply_n(apply_fine_operator(problem, z));
    return axpy(1.0, z, -1.0, nz);
}

GridField MgNetwork::unet_layer(int layer, const GridField& u) const {
    if (layer == num_levels() + 1) {
        const Kernel& kb = kernel_at(coarse.k1);
        GridField t = conv_same(conv_same(u, kb), kb);
        add_scaled(t, 1.0, u);
        return t;
    }
    const LevelParams& lp = levels[layer - 1];
    const Kernel& smooth_k = kernel_at(lp.smoothers[0]);
    const Kernel& transfer = kernel_at(lp.restriction);
    GridField v = conv_same(u, smooth_k);
    GridField d = conv_down(v, transfer, lp.stride);
    GridField e = unet_layer(layer + 1, d);
    GridField up = conv_up(e, transfer, lp.stride, side_at(layer), side_at(layer));
    GridField out = conv_same(up, smooth_k);
    add_scaled(out, 1.0, u);
    return out;
}

GridField MgNetwork::unet_apply(const GridField& u) const {
    if (kind != ModelKind::UNET) throw std::invalid_argument("unet_apply: not a U-Net model");
    return unet_layer(1, u);
}

GridField compute_diag_scale(const MgNetwork& net, int level) {
    const int n = net.side_at(level);
    if (level == 1) return GridField::constant(n, n, 1.0);  // unit center after preconditioning
    int radius = net.problem.stencil.radius();
    for (int l = 2; l <= level; ++l) radius = (2 + radius) / 2;
    const int stride = 2 * radius + 1;
    GridField diag(n, n);
    for (int oi = 0; oi < stride && oi < n; ++oi) {
        for (int oj = 0; oj < stride && oj < n; ++oj) {
            GridField comb(n, n);
            for (int i = oi; i < n; i += stride)
                for (int j = oj; j < n; j += stride) comb(i, j) = 1.0;
            GridField y = net.apply_level(level, comb);
            for (int i = oi; i < n; i += stride)
                for (int j = oj; j < n; j += stride) diag(i, j) = y(i, j);
        }
    }
    GridField scale = GridField::uninitialized(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!(diag(i, j) > 0.0))
                throw std::runtime_error("compute_diag_scale: non-positive diagonal entry");
            scale(i, j) = 1.0 / diag(i, j);
        }
    return scale;
}

namespace {

int unet_grid_count(int J) { return std::min(5, J); }
int fmg_layer_count(int J) { return std::min(4, J - 1); }

void fill_serialized_levels(MgNetwork& net) {
    const int levels = net.J - 1;
    net.levels.clear();
    net.levels.reserve(levels);
    const int w = net.params.index_of("w");
    switch (net.kind) {
        case ModelKind::LMG:
        case ModelKind::S1MG_RS:
        case ModelKind::S1MG_S: {
            const int s = net.params.index_of("w_tilde");
            for (int l = 0; l < levels; ++l) net.levels.push_back({w, {s}, {2, 2}, std::nullopt});
            break;
        }
        case ModelKind::S3MG_S: {
            const int s1 = net.params.index_of("w_tilde_1");
            const int s2 = net.params.index_of("w_tilde_2");
            const int s3 = net.params.index_of("w_tilde_3");
            const int cyc[3] = {s1, s2, s3};
            for (int l = 0; l < levels; ++l)
                net.levels.push_back({w, {cyc[l % 3]}, {2, 2}, std::nullopt});
            break;
        }
        default: throw std::logic_error("fill_serialized_levels: kind is not serialized");
    }
}

void fill_diag_scales(MgNetwork& net) {
    for (int l = 1; l <= net.num_levels(); ++l)
        net.levels[l - 1].diag_scale = compute_diag_scale(net, l);
}

bool kind_uses_diag_scale(ModelKind kind) {
    return kind == ModelKind::LMG || kind == ModelKind::S1MG_S || kind == ModelKind::S3MG_S;
}

int stored_numbered(const ParamStore& params, const std::string& prefix) {
    int count = 0;
    while (params.index_of(prefix + std::to_string(count + 1)) >= 0) ++count;
    return count;
}

void fill_unet_levels(MgNetwork& net) {
    // a built network never outgrows its stored layers: deeper grids reuse
    // the fixed net, shallower ones truncate finest-first
    const int stored = stored_numbered(net.params, "smooth_");
    const int grids =
        stored > 0 ? std::min(unet_grid_count(net.J), stored) : unet_grid_count(net.J);
    net.levels.clear();
    for (int l = 1; l <= grids - 1; ++l) {
        const int s = net.params.index_of("smooth_" + std::to_string(l));
        const int t = net.params.index_of("transfer_" + std::to_string(l));
        if (s < 0 || t < 0) throw std::logic_error("fill_unet_levels: missing kernel");
        net.levels.push_back({t, {s}, {2, 2}, std::nullopt});
    }
    const int bottom = net.params.index_of("smooth_" + std::to_string(grids));
    if (bottom < 0) throw std::logic_error("fill_unet_levels: missing bottom kernel");
    net.coarse = {CoarseSolver::Type::ConvPair, bottom, bottom};
}

void fill_fmg_levels(MgNetwork& net) {
    const int stored = stored_numbered(net.params, "w_");
    const int layers =
        stored > 0 ? std::min(fmg_layer_count(net.J), stored) : fmg_layer_count(net.J);
    net.levels.clear();
    for (int l = 1; l <= layers; ++l) {
        const int w = net.params.index_of("w_" + std::to_string(l));
        const int s = net.params.index_of("w_tilde_" + std::to_string(l));
        if (w < 0 || s < 0) throw std::logic_error("fill_fmg_levels: missing kernel");
        net.levels.push_back({w, {s}, {2, 2}, std::nullopt});
    }
    net.coarse = {CoarseSolver::Type::ConvPair, net.params.index_of("coarse_1"),
                  net.params.index_of("coarse_2")};
}

}  // namespace

MgNetwork build_model(ModelKind kind, int J, const ProblemSpec& problem) {
    if (J < 2) throw std::invalid_argument("build_model: J must be at least 2");
    MgNetwork net;
    net.kind = kind;
    net.problem = problem;
    net.J = J;
    net.trained_J = J;
    switch (kind) {
        case ModelKind::LMG:
            // bilinear transfers, two damped Jacobi sweeps with omega = 4/5
            net.params.add("w", bilinear_kernel(), false);
            net.params.add("w_tilde", identity_kernel(0.8), false);
            fill_serialized_levels(net);
            break;
        case ModelKind::S1MG_RS:
            net.params.add("w", bilinear_kernel(), true);
            net.params.add("w_tilde", bilinear_kernel(), true);
            fill_serialized_levels(net);
            break;
        case ModelKind::S1MG_S:
            net.params.add("w", bilinear_kernel(), false);
            net.params.add("w_tilde", bilinear_kernel(), true);
            fill_serialized_levels(net);
            break;
        case ModelKind::S3MG_S:
            net.params.add("w", bilinear_kernel(), false);
            net.params.add("w_tilde_1", bilinear_kernel(), true);
            net.params.add("w_tilde_2", bilinear_kernel(), true);
            net.params.add("w_tilde_3", bilinear_kernel(), true);
            fill_serialized_levels(net);
            break;
        case ModelKind::UNET: {
            const int grids = unet_grid_count(J);
            for (int l = 1; l <= grids - 1; ++l) {
                net.params.add("smooth_" + std::to_string(l), identity_kernel(1.0), true);
                net.params.add("transfer_" + std::to_string(l), bilinear_kernel(), true);
            }
            net.params.add("smooth_" + std::to_string(grids), identity_kernel(1.0), true);
            fill_unet_levels(net);
            net.pre_sweeps = 0;
            net.post_sweeps = 0;
            break;
        }
        case ModelKind::FMG: {
            const int layers = fmg_layer_count(J);
            for (int l = 1; l <= layers; ++l) {
                net.params.add("w_" + std::to_string(l), bilinear_kernel(), true);
                net.params.add("w_tilde_" + std::to_string(l), bilinear_kernel(), true);
            }
            net.params.add("coarse_1", bilinear_kernel(), true);
            net.params.add("coarse_2", bilinear_kernel(), true);
            fill_fmg_levels(net);
            break;
        }
    }
    if (kind_uses_diag_scale(kind)) fill_diag_scales(net);
    net.validate();
    net.prepare();
    return net;
}

MgNetwork serialize_to_depth(const MgNetwork& net, int J_new) {
    if (!model_serializable(net.kind))
        throw std::invalid_argument(
            "serialize_to_depth: " + model_name(net.kind) +
            " has a fixed size; evaluate the trained network unchanged instead");
    if (J_new < net.trained_J)
        throw std::invalid_argument("serialize_to_depth: target depth below trained depth");
    MgNetwork out = net;
    out.J = J_new;
    fill_serialized_levels(out);
    if (kind_uses_diag_scale(out.kind)) fill_diag_scales(out);
    out.validate();
    out.prepare();
    return out;
}

MgNetwork instantiate_at(const MgNetwork& net, int J_new) {
    if (J_new < 2) throw std::invalid_argument("instantiate_at: J must be at least 2");
    MgNetwork out = net;
    out.J = J_new;
    if (model_serializable(net.kind)) {
        fill_serialized_levels(out);
        if (kind_uses_diag_scale(out.kind)) fill_diag_scales(out);
    } else if (net.kind == ModelKind::UNET) {
        fill_unet_levels(out);
    } else {
        fill_fmg_levels(out);
    }
    out.validate();
    out.prepare();
    return out;
}

}  // namespace convmg
