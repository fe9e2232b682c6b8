#pragma once

#include "fusion/bscl.hpp"
#include "fusion/mccm.hpp"

namespace fusion {

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1. Multi-channel inputs are reduced to
// their channel mean first. Returns a scalar in [-1, 1].
Tensor ssim(const Tensor& x, const Tensor& y);

// (1 - ssim(f, a))/2 + (1 - ssim(f, b))/2
Tensor loss_ssim(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2);

// Mean absolute deviation from the element-wise maximum of the sources.
Tensor loss_int(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2);

struct LossWeights {
    double fcl = 0.8;
    double pcl = 0.4;
    double mccm = 1.0;
    double ssim = 1.0;
    double intensity = 1.0;
};

struct LossBreakdown {
    double fcl = 0, pcl = 0, mccm = 0, wb = 0, divr = 0, cons = 0;
    double ssim = 0, intensity = 0, total = 0, lambda = 0;
};

// Weighted sum of the five components; the breakdown mirrors the graph
// arithmetic exactly.
Tensor loss_total(const Tensor& f_mf, const Tensor& f_m1, const Tensor& f_m2,
                  const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2,
                  const GateDecision& gate,
                  const std::vector<Tensor>& expert_outs,
                  const LossWeights& w, int t, int total_epochs,
                  LossBreakdown* breakdown = nullptr);

}  // namespace fusion
