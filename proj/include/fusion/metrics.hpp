#pragma once

#include <string>

#include "fusion/tensor.hpp"

namespace fusion {

// Reference-free fusion quality metrics over [C,H,W] images in [0,1].
// Multi-channel inputs are reduced to their channel mean.

struct MetricReport {
    double mi = 0, sf = 0, ag = 0, cc = 0, scd = 0, ms_ssim = 0;
    std::string to_json() const;
};

// Histogram mutual information MI(F;A) + MI(F;B), 256 bins, natural log.
double metric_mi(const Tensor& f, const Tensor& a, const Tensor& b,
                 int bins = 256);

// sqrt(RF^2 + CF^2): RMS of horizontal and vertical first differences.
double metric_sf(const Tensor& f);

// Mean of sqrt((dx^2 + dy^2)/2) over valid pixels.
double metric_ag(const Tensor& f);

// (r(F,A) + r(F,B)) / 2, Pearson; zero variance counts as r = 0.
double metric_cc(const Tensor& f, const Tensor& a, const Tensor& b);

// r(F-B, A) + r(F-A, B).
double metric_scd(const Tensor& f, const Tensor& a, const Tensor& b);

// Five-scale MS-SSIM with the standard exponents, 2x2 mean-pool
// downsampling, mean over the two sources. Small images drop scales so
// the 11x11 window always fits, with exponents renormalized.
double metric_msssim(const Tensor& f, const Tensor& a, const Tensor& b);
int msssim_scale_count(int h, int w);

MetricReport evaluate_metrics(const Tensor& f, const Tensor& a,
                              const Tensor& b);

}  // namespace fusion
