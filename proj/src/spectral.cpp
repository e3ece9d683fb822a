#include "convmg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "convmg/parallel.hpp"

namespace convmg {

RademacherBatch sample_rademacher(int rows, int cols, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample_rademacher: need at least one vector");
    RademacherBatch batch;
    batch.vectors.reserve(n);
    std::mt19937_64 eng(seed);
    for (int j = 0; j < n; ++j) {
        GridField z = GridField::uninitialized(rows, cols);
        fill_rademacher(z, eng);
        batch.vectors.push_back(std::move(z));
    }
    return batch;
}

double rho1_estimate(const FieldMap& apply_B, int rows, int cols, const LossConfig& cfg) {
    if (cfg.power_k < 1) throw std::invalid_argument("rho1_estimate: power_k must be positive");
    RademacherBatch batch = sample_rademacher(rows, cols, cfg.n_batch, cfg.seed);
    std::vector<double> norms_sq(cfg.n_batch, 0.0);
    parallel_for(cfg.n_batch, [&](int j) {
        GridField y = batch.vectors[j];
        double ns = 0.0;
        for (int t = 0; t < cfg.power_k; ++t) {
            y = apply_B(y);
            ns = dot(y, y);
            if (!std::isfinite(ns)) break;
        }
        norms_sq[j] = ns;
    });
    double sum = 0.0;
    for (int j = 0; j < cfg.n_batch; ++j) {  // fixed accumulation order
        if (!std::isfinite(norms_sq[j])) return std::numeric_limits<double>::infinity();
        sum += norms_sq[j];
    }
    if (sum == 0.0) return 0.0;
    return std::pow(sum / cfg.n_batch, 1.0 / (2.0 * cfg.power_k));
}

double loss(const MgNetwork& net, const LossConfig& cfg) {
    const int n = net.fine_side();
    return rho1_estimate([&](const GridField& z) { return net.apply_error_propagation(z); }, n, n,
                         cfg);
}

double rho1_median(const MgNetwork& net, const LossConfig& cfg, int n_seeds) {
    if (n_seeds < 1) throw std::invalid_argument("rho1_median: need at least one seed");
    std::vector<double> values(n_seeds);
    for (int i = 0; i < n_seeds; ++i) {
        LossConfig c = cfg;
        c.seed = derive_seed(cfg.seed, i);
        values[i] = loss(net, c);
    }
    std::sort(values.begin(), values.end());
    const int mid = n_seeds / 2;
    if (n_seeds % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace convmg
