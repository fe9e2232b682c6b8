#pragma once

#include <memory>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion {

// Elementwise binary ops. Shapes must match, except that either side may be
// a scalar (shape [1]), which broadcasts.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor emax(const Tensor& a, const Tensor& b);  // ties keep a's gradient

// Elementwise unary.
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);
Tensor abs_t(const Tensor& x);    // gradient 0 at 0
Tensor sqrt_t(const Tensor& x);   // gradient 0 at 0; negative input rejected
Tensor cos_t(const Tensor& x);
Tensor sin_t(const Tensor& x);
Tensor hypot_t(const Tensor& a, const Tensor& b);  // gradient 0 at the origin
Tensor atan2_t(const Tensor& y, const Tensor& x);  // gradient 0 at the origin

// Activations.
Tensor gelu(const Tensor& x);  // exact Gaussian-CDF form
Tensor silu(const Tensor& x);
Tensor softplus_t(const Tensor& x);
Tensor sigmoid_t(const Tensor& x);
Tensor softmax_lastaxis(const Tensor& x);

// Reductions.
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]

// Structure.
Tensor concat(const std::vector<Tensor>& xs, int axis);
Tensor slice(const Tensor& x, int axis, int start, int len);
// out[i] = x[map[i]]; repeated sources allowed, backward accumulates.
Tensor gather_map(const Tensor& x, Shape out_shape, std::vector<int> map);
Tensor gather_idx(const Tensor& x, const std::vector<int>& idx);  // rank-1
// out[idx[j]] = x[j], zeros elsewhere (structural, no gradient to zeros).
Tensor scatter_idx(const Tensor& x, const std::vector<int>& idx, int n);

// Feature-map <-> token-sequence movement.
Tensor chw_to_tokens(const Tensor& x);                      // [C,H,W] -> [H*W,C]
Tensor tokens_to_chw(const Tensor& x, int C, int H, int W); // inverse
Tensor broadcast_channels(const Tensor& v, int H, int W);   // [C] -> [C,H,W]
Tensor mean_spatial(const Tensor& x);   // [C,H,W] -> [C]
Tensor max_spatial(const Tensor& x);    // [C,H,W] -> [C]
Tensor mean_channels(const Tensor& x);  // [C,H,W] -> [1,H,W]

// x: [L,D] or [D]; w: [D,K]; optional bias [K].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor());

enum class ConvKind { Full3x3, Depthwise3x3, Pointwise1x1 };
// Full/depthwise use zero padding 1 so spatial extent is preserved.
// Kernel shapes: full [Cout,Cin,3,3], depthwise [C,3,3], pointwise [Cout,Cin].
Tensor conv2d(const Tensor& x, const Tensor& w, ConvKind kind,
              const Tensor& bias = Tensor());

// Normalizes across channels per spatial position (rank 3), across the last
// axis per row (rank 2), or over everything (rank 1).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps);

// Correlation with a constant window, valid extent (no padding).
Tensor window_filter_valid(const Tensor& x, const std::vector<double>& w,
                           int wh, int ww);

// Applies a constant K x N matrix along one axis (x extent N -> K).
Tensor axis_mat(const Tensor& x,
                std::shared_ptr<const std::vector<double>> m, int k, int n,
                int axis);

}  // namespace fusion
