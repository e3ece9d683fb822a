#pragma once

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace convmg {

/// Small odd-sized square convolution kernel. Houses trainable restriction
/// and smoothing weights as well as the fixed problem stencils.
class Kernel {
public:
    Kernel() = default;

    explicit Kernel(int size) : size_(checked_size(size)), weights_(std::size_t(size) * size, 0.0) {}

    Kernel(int size, std::initializer_list<double> weights) : Kernel(size) {
        if (static_cast<int>(weights.size()) != size * size)
            throw std::invalid_argument("Kernel: wrong number of weights");
        std::size_t i = 0;
        for (double w : weights) weights_[i++] = w;
    }

    Kernel(int size, std::vector<double> weights) : size_(checked_size(size)), weights_(std::move(weights)) {
        if (static_cast<int>(weights_.size()) != size_ * size_)
            throw std::invalid_argument("Kernel: wrong number of weights");
    }

    int size() const { return size_; }
    int radius() const { return (size_ - 1) / 2; }

    double& operator()(int p, int q) { return weights_[std::size_t(p) * size_ + q]; }
    double operator()(int p, int q) const { return weights_[std::size_t(p) * size_ + q]; }

    double* data() { return weights_.data(); }
    const double* data() const { return weights_.data(); }
    const std::vector<double>& weights() const { return weights_; }

    bool all_finite() const {
        for (double w : weights_)
            if (!std::isfinite(w)) return false;
        return true;
    }

    double sum() const {
        double s = 0.0;
        for (double w : weights_) s += w;
        return s;
    }

    Kernel rotated180() const {
        Kernel r(size_);
        for (int p = 0; p < size_; ++p)
            for (int q = 0; q < size_; ++q) r(p, q) = (*this)(size_ - 1 - p, size_ - 1 - q);
        return r;
    }

    Kernel scaled(double c) const {
        Kernel r = *this;
        for (double& w : r.weights_) w *= c;
        return r;
    }

private:
    static int checked_size(int size) {
        if (size <= 0 || size % 2 == 0)
            throw std::invalid_argument("Kernel: size must be odd and positive");
        return size;
    }

    int size_ = 0;
    std::vector<double> weights_;
};

/// Strides of a grid-transfer convolution; (2,2) for all in-scope models.
struct StrideSpec {
    int row = 2;
    int col = 2;
};

/// 3x3 delta kernel scaled by c: conv with it multiplies a field by c.
inline Kernel identity_kernel(double c = 1.0) {
    Kernel k(3);
    k(1, 1) = c;
    return k;
}

/// Bilinear interpolation weights, the fixed restriction of the baseline
/// solver: 1/2 * [[1/4,1/2,1/4],[1/2,1,1/2],[1/4,1/2,1/4]].
inline Kernel bilinear_kernel() {
    return Kernel(3, {0.125, 0.25, 0.125, 0.25, 0.5, 0.25, 0.125, 0.25, 0.125});
}

}  // namespace convmg
