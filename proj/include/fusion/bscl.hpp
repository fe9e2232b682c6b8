#pragma once

#include "fusion/ops.hpp"

namespace fusion {

// Haar lifting decomposition along one axis: even/odd split, identity
// prediction, half-residual update. Invertible exactly (only +, -, /2).
struct LiftPair {
    Tensor low, high;
    int axis = 0;
};

LiftPair lift_split(const Tensor& x, int axis);
Tensor lift_merge(const LiftPair& pair);

// Feature-level contrastive ratio loss. f_mf must be twice the channel
// width of each modality feature; lifting runs along the channel axis.
// Norms are (mean absolute difference)^2 with a 1e-8 denominator floor.
Tensor loss_fcl(const Tensor& f_mf, const Tensor& f_m1, const Tensor& f_m2);

// Pixel-level variant: lifting runs along the horizontal pixel axis and
// sources are concatenated along channels (the fused bands are tiled to
// match).
Tensor loss_pcl(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2);

}  // namespace fusion
