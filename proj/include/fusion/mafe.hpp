#pragma once

#include "fusion/fft.hpp"
#include "fusion/ssm.hpp"

namespace fusion {

struct MafeConfig {
    int in_channels = 1;
    int width = 8;  // C, must be even (the global branches run at C/2)
    int state = 4;
    bool bidirectional = true;
    double ln_eps = 1e-5;
};

// Per-modality feature enhancement block: shallow stem, gated local branch,
// spatial-channel SSM branch, frequency-rotational SSM branch. Output width
// is 2C (local C, global C = spatial C/2 + frequency C/2).
struct MafeParams {
    MafeConfig cfg;

    Parameter stem_w, stem_b;          // full 3x3, Cin -> C
    Parameter stem_ln_g, stem_ln_b;    // [C]

    Parameter local_dw_w, local_dw_b;      // depthwise 3x3, shared per quadrant
    Parameter local_gate_w, local_gate_b;  // pointwise C -> C

    Parameter spa_pw_w, spa_pw_b;  // pointwise C -> C/2
    Parameter spa_dw_w, spa_dw_b;  // depthwise 3x3
    SsmParams spa_fwd, spa_bwd;    // spatial pass, D = C/2
    SsmParams chan_fwd, chan_bwd;  // channel pass over pooled descriptors, D = 1
    Parameter spa_ln_g, spa_ln_b;
    Parameter spa_gate_w, spa_gate_b;  // pointwise C -> C/2

    Parameter fre_pw_w, fre_pw_b;          // pointwise C -> C/2 prologue
    Parameter fre_amp_dw_w, fre_amp_dw_b;  // depthwise 3x3 on amplitude
    Parameter fre_pha_dw_w, fre_pha_dw_b;  // depthwise 3x3 on phase
    SsmParams fre_amp_fwd, fre_amp_bwd;
    SsmParams fre_pha_fwd, fre_pha_bwd;
    Parameter fre_gate_w, fre_gate_b;  // pointwise C -> C/2
};

MafeParams make_mafe_params(ParamRegistry& reg, const std::string& prefix,
                            const MafeConfig& cfg, Rng& rng);

// LN(Conv3x3(image)); H and W must be even.
Tensor shallow_stem(const Tensor& image, const MafeParams& p);

// Four half-resolution quadrants, shared depthwise conv, GELU gate.
Tensor local_branch(const Tensor& fsk, const MafeParams& p);

// Spatial raster pass plus pooled channel pass, normalized and gated.
Tensor global_spatial(const Tensor& fsk, const MafeParams& p);

// Fourier amplitude/phase modulated multiplicatively by scanned fields,
// projected back through a Hermitian-symmetrized inverse transform.
Tensor global_frequency(const Tensor& fsk, const MafeParams& p);

// Cat(local, Cat(spatial, frequency)): [Cin,H,W] -> [2C,H,W].
Tensor mafe_forward(const Tensor& image, const MafeParams& p);

}  // namespace fusion
