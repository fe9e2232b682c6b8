#include "fusion/mccm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fusion/ops.hpp"

namespace fusion {

void MccmConfig::validate() const {
    if (experts < 1) throw UsageError("mccm: experts must be >= 1");
    if (top_k < 1 || top_k > experts)
        throw UsageError("mccm: top_k " + std::to_string(top_k) +
                         " must be in [1, experts=" + std::to_string(experts) +
                         "]");
    if (feat_width < 1) throw UsageError("mccm: feat_width must be >= 1");
}

MccmParams make_mccm_params(ParamRegistry& reg, const std::string& prefix,
                            const MccmConfig& cfg, Rng& rng) {
    cfg.validate();
    const int cw = cfg.feat_width, ew = 2 * cw;
    double bp = 1.0 / std::sqrt(static_cast<double>(cw));
    double be = 1.0 / std::sqrt(static_cast<double>(ew));
    MccmParams p;
    p.cfg = cfg;
    for (int i = 0; i < cfg.experts; ++i) {
        std::string ep = prefix + ".expert" + std::to_string(i);
        ExpertParams e;
        e.ln_g1 = reg.create_const(ep + ".ln_g1", {cw}, 1.0);
        e.ln_b1 = reg.create_const(ep + ".ln_b1", {cw}, 0.0);
        e.lin_w1 = reg.create_uniform(ep + ".lin_w1", {ew, cw}, rng, -bp, bp);
        e.lin_b1 = reg.create_const(ep + ".lin_b1", {ew}, 0.0);
        e.pw_w1 = reg.create_uniform(ep + ".pw_w1", {ew, ew}, rng, -be, be);
        e.pw_b1 = reg.create_const(ep + ".pw_b1", {ew}, 0.0);
        e.ln_g2 = reg.create_const(ep + ".ln_g2", {cw}, 1.0);
        e.ln_b2 = reg.create_const(ep + ".ln_b2", {cw}, 0.0);
        e.lin_w2 = reg.create_uniform(ep + ".lin_w2", {ew, cw}, rng, -bp, bp);
        e.lin_b2 = reg.create_const(ep + ".lin_b2", {ew}, 0.0);
        e.pw_w2 = reg.create_uniform(ep + ".pw_w2", {ew, ew}, rng, -be, be);
        e.pw_b2 = reg.create_const(ep + ".pw_b2", {ew}, 0.0);
        e.cm_fwd = make_ssm_params(reg, ep + ".cm_fwd", ew, cfg.state, rng);
        e.cm_bwd = make_ssm_params(reg, ep + ".cm_bwd", ew, cfg.state, rng);
        p.experts.push_back(std::move(e));
    }
    double bg = 1.0 / std::sqrt(static_cast<double>(2 * cw));
    p.gate.w_g = reg.create_uniform(prefix + ".gate.w_g",
                                    {2 * cw, cfg.experts}, rng, -bg, bg);
    p.gate.w_noise = reg.create_uniform(prefix + ".gate.w_noise",
                                        {2 * cw, cfg.experts}, rng, -bg, bg);
    return p;
}

GateDecision gate_decide(const Tensor& f_mc, const MccmParams& p, Rng* rng,
                         bool train) {
    const int n = p.cfg.experts, k = p.cfg.top_k;
    if (f_mc.rank() != 3 || f_mc.shape()[0] != 2 * p.cfg.feat_width)
        throw ShapeError("gate expects [2C',H,W] with C'=" +
                         std::to_string(p.cfg.feat_width) + ", got " +
                         shape_str(f_mc.shape()));

    Tensor fg = add(mean_spatial(f_mc), max_spatial(f_mc));  // GAP + GMP
    Tensor logits = linear(fg, p.gate.w_g.tensor());

    GateDecision d;
    d.logits = logits.data();
    Tensor noisy = logits;
    if (train) {
        if (!rng) throw UsageError("gate: train mode requires an rng");
        std::vector<double> draws(n);
        for (auto& v : draws) v = rng->normal();
        Tensor eps = mul(Tensor::from({n}, std::move(draws)),
                         softplus_t(linear(fg, p.gate.w_noise.tensor())));
        d.noise = eps.data();
        noisy = add(logits, eps);
    } else {
        d.noise.assign(n, 0.0);
    }

    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    const std::vector<double>& nv = noisy.data();
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (nv[a] != nv[b]) return nv[a] > nv[b];
        return a < b;  // ties toward the lower expert index
    });
    d.selected.assign(idx.begin(), idx.begin() + k);

    // softmax over the selected noisy logits; the selection itself is
    // treated as constant under differentiation
    Tensor sw = softmax_lastaxis(gather_idx(noisy, d.selected));
    d.weights_t = scatter_idx(sw, d.selected, n);
    d.weights = d.weights_t.data();
    return d;
}

Tensor cm_expert(const Tensor& f1, const Tensor& f2, const ExpertParams& e,
                 const MccmConfig& cfg, CmExpertTrace* trace) {
    if (f1.shape() != f2.shape())
        throw ShapeError("cm_expert: modality shapes differ: " +
                         shape_str(f1.shape()) + " vs " +
                         shape_str(f2.shape()));
    const int h = f1.shape()[1], w = f1.shape()[2], hw = h * w;
    const int ew = 2 * cfg.feat_width;

    Tensor ln1 = layer_norm(f1, e.ln_g1.tensor(), e.ln_b1.tensor(), cfg.ln_eps);
    Tensor fln1 = conv2d(ln1, e.lin_w1.tensor(), ConvKind::Pointwise1x1,
                         e.lin_b1.tensor());
    Tensor silu1 = silu(conv2d(fln1, e.pw_w1.tensor(), ConvKind::Pointwise1x1,
                               e.pw_b1.tensor()));
    Tensor ln2 = layer_norm(f2, e.ln_g2.tensor(), e.ln_b2.tensor(), cfg.ln_eps);
    Tensor fln2 = conv2d(ln2, e.lin_w2.tensor(), ConvKind::Pointwise1x1,
                         e.lin_b2.tensor());
    Tensor silu2 = silu(conv2d(fln2, e.pw_w2.tensor(), ConvKind::Pointwise1x1,
                               e.pw_b2.tensor()));

    // combined storage is (modality1; modality2); the two interleaved
    // orders traverse it starting from either side
    Tensor combined = concat({chw_to_tokens(silu1), chw_to_tokens(silu2)}, 0);
    ScanOrder raster = spatial_raster(h, w);
    ScanOrder ord1 = cross_modal_interleave(raster, raster, 1, 2);
    ScanOrder ord2 = cross_modal_interleave(raster, raster, 2, 1);
    Tensor cm1 = tokens_to_chw(
        slice(directional_scan(combined, e.cm_fwd, e.cm_bwd, ord1,
                               cfg.bidirectional),
              0, 0, hw),
        ew, h, w);
    Tensor cm2 = tokens_to_chw(
        slice(directional_scan(combined, e.cm_fwd, e.cm_bwd, ord2,
                               cfg.bidirectional),
              0, hw, hw),
        ew, h, w);

    if (trace) *trace = {fln1, fln2, cm1, cm2};
    return add(mul(cm1, silu(fln2)), mul(cm2, silu(fln1)));
}

MccmResult mccm_forward(const Tensor& f1, const Tensor& f2,
                        const MccmParams& p, Rng* rng, bool train) {
    MccmResult r;
    Tensor f_mc = concat({f1, f2}, 0);
    r.gate = gate_decide(f_mc, p, rng, train);

    r.expert_outputs.resize(p.cfg.experts);
    if (train) {
        for (int i = 0; i < p.cfg.experts; ++i)
            r.expert_outputs[i] = cm_expert(f1, f2, p.experts[i], p.cfg);
    } else {
        for (int i : r.gate.selected)
            r.expert_outputs[i] = cm_expert(f1, f2, p.experts[i], p.cfg);
    }

    // sum over selected experts only, in selection order, so train and
    // inference produce identical arithmetic for identical weights
    Tensor fused;
    for (int i : r.gate.selected) {
        Tensor term = mul(slice(r.gate.weights_t, 0, i, 1),
                          r.expert_outputs[i]);
        fused = fused.defined() ? add(fused, term) : term;
    }
    r.fused = fused;
    return r;
}

Tensor loss_wb(const Tensor& weights) {
    Tensor m = mean_all(weights);
    Tensor d = sub(weights, m);
    Tensor var = mean_all(mul(d, d));
    return div(var, mul(m, m));
}

Tensor loss_div(const std::vector<Tensor>& outs) {
    const int n = static_cast<int>(outs.size());
    if (n < 2) throw UsageError("loss_div needs at least 2 expert outputs");
    Tensor total = Tensor::scalar(0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Tensor n2a = sum_all(mul(outs[i], outs[i]));
            Tensor n2b = sum_all(mul(outs[j], outs[j]));
            if (n2a.item() == 0.0 || n2b.item() == 0.0) continue;
            Tensor c = div(sum_all(mul(outs[i], outs[j])),
                           mul(sqrt_t(n2a), sqrt_t(n2b)));
            total = add(total, scale(c, 2.0));  // both ordered pairs
        }
    return scale(total, 1.0 / (static_cast<double>(n) * (n - 1)));
}

Tensor loss_cons(const std::vector<Tensor>& outs, const GateDecision& gate) {
    Tensor consensus;
    for (int i : gate.selected) {
        Tensor term = mul(slice(gate.weights_t, 0, i, 1), outs[i]);
        consensus = consensus.defined() ? add(consensus, term) : term;
    }
    Tensor total = Tensor::scalar(0.0);
    for (int i : gate.selected) {
        Tensor d = sub(outs[i], consensus);
        total = add(total, mul(slice(gate.weights_t, 0, i, 1),
                               mean_all(mul(d, d))));
    }
    return total;
}

double lambda_schedule(int t, int total_epochs) {
    if (total_epochs < 1)
        throw UsageError("lambda schedule: total epochs must be >= 1");
    if (t < 0) throw UsageError("lambda schedule: t must be >= 0");
    if (t > total_epochs) {
        std::fprintf(stderr,
                     "warning: lambda schedule t=%d beyond horizon T=%d, "
                     "clamping\n",
                     t, total_epochs);
        t = total_epochs;
    }
    if (t == 0) return 1.0;
    if (t == total_epochs) return 0.0;
    return std::cos(static_cast<double>(t) / total_epochs * M_PI / 2.0);
}

MccmLossParts loss_mccm(const GateDecision& gate,
                        const std::vector<Tensor>& outs, int t,
                        int total_epochs) {
    MccmLossParts parts;
    parts.lambda = lambda_schedule(t, total_epochs);
    parts.wb = loss_wb(gate.weights_t);
    parts.div = loss_div(outs);
    parts.cons = loss_cons(outs, gate);
    parts.total = add(parts.wb, add(scale(parts.div, parts.lambda),
                                    scale(parts.cons, 1.0 - parts.lambda)));
    return parts;
}

}  // namespace fusion
