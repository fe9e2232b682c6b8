#include "fusion/mafe.hpp"

#include <cmath>
#include <numeric>

namespace fusion {

namespace {
double fan_in_bound(int fan) { return 1.0 / std::sqrt(static_cast<double>(fan)); }

Tensor reshape_vec(const Tensor& v, const Shape& s) {
    std::vector<int> map(v.numel());
    std::iota(map.begin(), map.end(), 0);
    return gather_map(v, s, std::move(map));
}
}  // namespace

MafeParams make_mafe_params(ParamRegistry& reg, const std::string& prefix,
                            const MafeConfig& cfg, Rng& rng) {
    if (cfg.width < 2 || cfg.width % 2 != 0)
        throw UsageError("mafe width must be even and >= 2, got " +
                         std::to_string(cfg.width));
    const int c = cfg.width, half = c / 2, cin = cfg.in_channels;
    MafeParams p;
    p.cfg = cfg;

    double bs = fan_in_bound(cin * 9);
    p.stem_w = reg.create_uniform(prefix + ".stem.w", {c, cin, 3, 3}, rng, -bs, bs);
    p.stem_b = reg.create_const(prefix + ".stem.b", {c}, 0.0);
    p.stem_ln_g = reg.create_const(prefix + ".stem.ln_g", {c}, 1.0);
    p.stem_ln_b = reg.create_const(prefix + ".stem.ln_b", {c}, 0.0);

    double bd = fan_in_bound(9);
    p.local_dw_w = reg.create_uniform(prefix + ".local.dw_w", {c, 3, 3}, rng, -bd, bd);
    p.local_dw_b = reg.create_const(prefix + ".local.dw_b", {c}, 0.0);
    double bp = fan_in_bound(c);
    p.local_gate_w = reg.create_uniform(prefix + ".local.gate_w", {c, c}, rng, -bp, bp);
    p.local_gate_b = reg.create_const(prefix + ".local.gate_b", {c}, 0.0);

    p.spa_pw_w = reg.create_uniform(prefix + ".spa.pw_w", {half, c}, rng, -bp, bp);
    p.spa_pw_b = reg.create_const(prefix + ".spa.pw_b", {half}, 0.0);
    p.spa_dw_w = reg.create_uniform(prefix + ".spa.dw_w", {half, 3, 3}, rng, -bd, bd);
    p.spa_dw_b = reg.create_const(prefix + ".spa.dw_b", {half}, 0.0);
    p.spa_fwd = make_ssm_params(reg, prefix + ".spa.fwd", half, cfg.state, rng);
    p.spa_bwd = make_ssm_params(reg, prefix + ".spa.bwd", half, cfg.state, rng);
    p.chan_fwd = make_ssm_params(reg, prefix + ".chan.fwd", 1, cfg.state, rng);
    p.chan_bwd = make_ssm_params(reg, prefix + ".chan.bwd", 1, cfg.state, rng);
    p.spa_ln_g = reg.create_const(prefix + ".spa.ln_g", {half}, 1.0);
    p.spa_ln_b = reg.create_const(prefix + ".spa.ln_b", {half}, 0.0);
    p.spa_gate_w = reg.create_uniform(prefix + ".spa.gate_w", {half, c}, rng, -bp, bp);
    p.spa_gate_b = reg.create_const(prefix + ".spa.gate_b", {half}, 0.0);

    p.fre_pw_w = reg.create_uniform(prefix + ".fre.pw_w", {half, c}, rng, -bp, bp);
    p.fre_pw_b = reg.create_const(prefix + ".fre.pw_b", {half}, 0.0);
    p.fre_amp_dw_w = reg.create_uniform(prefix + ".fre.amp_dw_w", {half, 3, 3}, rng, -bd, bd);
    p.fre_amp_dw_b = reg.create_const(prefix + ".fre.amp_dw_b", {half}, 0.0);
    p.fre_pha_dw_w = reg.create_uniform(prefix + ".fre.pha_dw_w", {half, 3, 3}, rng, -bd, bd);
    p.fre_pha_dw_b = reg.create_const(prefix + ".fre.pha_dw_b", {half}, 0.0);
    p.fre_amp_fwd = make_ssm_params(reg, prefix + ".fre.amp_fwd", half, cfg.state, rng);
    p.fre_amp_bwd = make_ssm_params(reg, prefix + ".fre.amp_bwd", half, cfg.state, rng);
    p.fre_pha_fwd = make_ssm_params(reg, prefix + ".fre.pha_fwd", half, cfg.state, rng);
    p.fre_pha_bwd = make_ssm_params(reg, prefix + ".fre.pha_bwd", half, cfg.state, rng);
    p.fre_gate_w = reg.create_uniform(prefix + ".fre.gate_w", {half, c}, rng, -bp, bp);
    p.fre_gate_b = reg.create_const(prefix + ".fre.gate_b", {half}, 0.0);
    return p;
}

Tensor shallow_stem(const Tensor& image, const MafeParams& p) {
    if (image.rank() != 3)
        throw ShapeError("shallow_stem expects [C,H,W], got " +
                         shape_str(image.shape()));
    int h = image.shape()[1], w = image.shape()[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("shallow_stem: extents " + std::to_string(h) + "x" +
                         std::to_string(w) +
                         " must be even; resize the input to even H and W");
    Tensor conv = conv2d(image, p.stem_w.tensor(), ConvKind::Full3x3,
                         p.stem_b.tensor());
    return layer_norm(conv, p.stem_ln_g.tensor(), p.stem_ln_b.tensor(),
                      p.cfg.ln_eps);
}

Tensor local_branch(const Tensor& fsk, const MafeParams& p) {
    int h = fsk.shape()[1], w = fsk.shape()[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("local_branch: extents must be even");
    int hh = h / 2, hw = w / 2;
    auto process = [&](int i0, int j0) {
        Tensor q = slice(slice(fsk, 1, i0, hh), 2, j0, hw);
        Tensor d = conv2d(q, p.local_dw_w.tensor(), ConvKind::Depthwise3x3,
                          p.local_dw_b.tensor());
        Tensor g = gelu(conv2d(d, p.local_gate_w.tensor(),
                               ConvKind::Pointwise1x1, p.local_gate_b.tensor()));
        return mul(g, d);
    };
    Tensor tl = process(0, 0), tr = process(0, hw);
    Tensor bl = process(hh, 0), br = process(hh, hw);
    Tensor top = concat({tl, tr}, 2);
    Tensor bot = concat({bl, br}, 2);
    return concat({top, bot}, 1);
}

Tensor global_spatial(const Tensor& fsk, const MafeParams& p) {
    int h = fsk.shape()[1], w = fsk.shape()[2];
    int half = p.cfg.width / 2;
    Tensor proj = conv2d(fsk, p.spa_pw_w.tensor(), ConvKind::Pointwise1x1,
                         p.spa_pw_b.tensor());
    Tensor fdw = conv2d(proj, p.spa_dw_w.tensor(), ConvKind::Depthwise3x3,
                        p.spa_dw_b.tensor());
    Tensor u = silu(fdw);

    Tensor spa_tokens = chw_to_tokens(u);  // [H*W, C/2]
    Tensor spa = directional_scan(spa_tokens, p.spa_fwd, p.spa_bwd,
                                  spatial_raster(h, w), p.cfg.bidirectional);
    Tensor spa_map = tokens_to_chw(spa, half, h, w);

    // channel pass over pooled per-channel descriptors, broadcast back
    Tensor desc = reshape_vec(mean_spatial(u), {half, 1});
    Tensor chan = directional_scan(desc, p.chan_fwd, p.chan_bwd,
                                   channel_order(half), p.cfg.bidirectional);
    Tensor chan_map = broadcast_channels(reshape_vec(chan, {half}), h, w);

    Tensor ln = layer_norm(add(spa_map, chan_map), p.spa_ln_g.tensor(),
                           p.spa_ln_b.tensor(), p.cfg.ln_eps);
    Tensor gate = silu(conv2d(fsk, p.spa_gate_w.tensor(),
                              ConvKind::Pointwise1x1, p.spa_gate_b.tensor()));
    return mul(ln, gate);
}

Tensor global_frequency(const Tensor& fsk, const MafeParams& p) {
    int h = fsk.shape()[1], w = fsk.shape()[2];
    int half = p.cfg.width / 2;
    Tensor proj = conv2d(fsk, p.fre_pw_w.tensor(), ConvKind::Pointwise1x1,
                         p.fre_pw_b.tensor());
    ComplexTensor spec = fft2(proj);
    auto [amp, phase] = amp_phase(spec);

    ScanOrder ring = frequency_rotational(h, w);
    auto scanned = [&](const Tensor& plane, const Parameter& dw_w,
                       const Parameter& dw_b, const SsmParams& fwd,
                       const SsmParams& bwd) {
        Tensor m = silu(conv2d(plane, dw_w.tensor(), ConvKind::Depthwise3x3,
                               dw_b.tensor()));
        Tensor t = directional_scan(chw_to_tokens(m), fwd, bwd, ring,
                                    p.cfg.bidirectional);
        return tokens_to_chw(t, half, h, w);
    };
    // multiplicative modulation keeps amplitude >= 0 (via softplus) and
    // leaves zero-amplitude bins at zero
    Tensor amp_mod = softplus_t(scanned(amp, p.fre_amp_dw_w, p.fre_amp_dw_b,
                                        p.fre_amp_fwd, p.fre_amp_bwd));
    Tensor pha_mod = scanned(phase, p.fre_pha_dw_w, p.fre_pha_dw_b,
                             p.fre_pha_fwd, p.fre_pha_bwd);
    ComplexTensor modded =
        hermitian_symmetrize(recompose(mul(amp, amp_mod), mul(phase, pha_mod)));
    double residue = 0;
    Tensor spatial = ifft2_real(modded, &residue);
    if (!(residue < 1e-9))
        throw NumericError("global_frequency: imaginary residue " +
                           std::to_string(residue) + " exceeds 1e-9");
    Tensor gate = silu(conv2d(fsk, p.fre_gate_w.tensor(),
                              ConvKind::Pointwise1x1, p.fre_gate_b.tensor()));
    return mul(spatial, gate);
}

Tensor mafe_forward(const Tensor& image, const MafeParams& p) {
    Tensor fsk = shallow_stem(image, p);
    Tensor local = local_branch(fsk, p);
    Tensor global = concat({global_spatial(fsk, p), global_frequency(fsk, p)}, 0);
    return concat({local, global}, 0);
}

}  // namespace fusion
