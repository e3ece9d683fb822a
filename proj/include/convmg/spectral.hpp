#pragma once

#include <cstdint>
#include <vector>

#include "convmg/network.hpp"
#include "convmg/rng.hpp"

namespace convmg {

/// Configuration of the stochastic spectral-radius estimate
///   rho1(B, k, N) = ( (1/N) sum_j ||B^k z_j||_2^2 )^(1/2k),
/// with i.i.d. Rademacher vectors z_j.
struct LossConfig {
    int power_k = 10;
    int n_batch = 10;
    std::uint64_t seed = 0;
};

struct RademacherBatch {
    std::vector<GridField> vectors;
};

/// Deterministic given the seed; every entry is exactly +-1.
RademacherBatch sample_rademacher(int rows, int cols, int n, std::uint64_t seed);

/// Estimate of the spectral radius of a shape-preserving linear map.
/// Divergent evaluations (non-finite intermediates) report +infinity
/// instead of failing; batch members may be evaluated concurrently but are
/// accumulated in batch order.
double rho1_estimate(const FieldMap& apply_B, int rows, int cols, const LossConfig& cfg);

/// The training objective: rho1 of the error-propagation operator I - NA.
double loss(const MgNetwork& net, const LossConfig& cfg);

/// Median of rho1 over n_seeds evaluations whose seeds derive from
/// cfg.seed; the convention behind reported tables.
double rho1_median(const MgNetwork& net, const LossConfig& cfg, int n_seeds);

}  // namespace convmg
