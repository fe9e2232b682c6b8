#pragma once

#include "fusion/scan_order.hpp"
#include "fusion/tensor.hpp"

namespace fusion {

// Selective state-space kernel parameters. The state matrix is stored as
// a_log and realized as A = -exp(a_log), so every diagonal entry stays
// strictly negative and exp(delta*A) < 1 for delta > 0.
struct SsmParams {
    int dim = 0;    // D, token feature width
    int state = 0;  // S, recurrent state per channel
    Parameter a_log;    // [D,S]
    Parameter w_delta;  // [D]   per-token step size projection
    Parameter b_delta;  // [1]
    Parameter w_b;      // [D,S]
    Parameter b_b;      // [S]
    Parameter w_c;      // [D,S]
    Parameter b_c;      // [S]
    Parameter skip;     // [D]
};

SsmParams make_ssm_params(ParamRegistry& reg, const std::string& prefix,
                          int dim, int state, Rng& rng);

// Visits tokens in scan order; per channel d:
//   h <- exp(delta_t*A_d) (.) h + delta_t * B_t * x_{t,d}
//   y_{t,d} = <C_t, h> + skip_d * x_{t,d}
// with delta_t = softplus(x_t.w_delta + b_delta), B_t/C_t affine in x_t.
// Outputs are written back to original token positions.
Tensor selective_scan(const Tensor& tokens, const SsmParams& params,
                      const ScanOrder& order);

// 0.5 * (forward pass + reverse-order pass with the second parameter set).
Tensor bidirectional_scan(const Tensor& tokens, const SsmParams& fwd,
                          const SsmParams& bwd, const ScanOrder& order);

// Single- or bi-directional depending on the flag; the single direction
// uses the forward parameter set only.
Tensor directional_scan(const Tensor& tokens, const SsmParams& fwd,
                        const SsmParams& bwd, const ScanOrder& order,
                        bool bidirectional);

}  // namespace fusion
