#pragma once

#include "convmg/network.hpp"
#include "convmg/spectral.hpp"

namespace convmg {

struct LossAndGrad {
    double value = 0.0;         // rho1 estimate; +infinity on divergence
    bool finite = false;        // false when value or any gradient is not finite
    std::vector<Kernel> grads;  // one per params entry; zero for fixed kernels
};

/// Exact reverse-mode derivative of loss(net, cfg) with respect to every
/// trainable kernel entry, computed by composing the adjoints of the three
/// convolution primitives along the cycle's fixed structure. Shared kernels
/// accumulate contributions from every site of use. The forward value is
/// bit-identical to loss(net, cfg).
LossAndGrad loss_and_gradient(const MgNetwork& net, const LossConfig& cfg);

}  // namespace convmg
