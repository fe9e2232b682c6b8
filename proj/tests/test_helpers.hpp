#pragma once

#include <cmath>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion::test {

inline Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(s, std::move(v));
}

inline Parameter random_param(const std::string& name, const Shape& s,
                              Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Parameter(name, s, std::move(v));
}

// random values on the dyadic grid k/2^20, where lifting arithmetic is exact
inline Tensor random_dyadic(const Shape& s, Rng& rng) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v)
        x = static_cast<double>(rng.uniform_int(-(1 << 20), 1 << 20)) /
            static_cast<double>(1 << 20);
    return Tensor::from(s, std::move(v));
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (long long i = 0; i < a.numel(); ++i)
        m = std::max(m, std::fabs(a.at(i) - b.at(i)));
    return m;
}

inline double max_abs(const Tensor& a) {
    double m = 0;
    for (double v : a.data()) m = std::max(m, std::fabs(v));
    return m;
}

}  // namespace fusion::test
