// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion. Returns the number of failed
// criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "fusion/fft.hpp"
#include "fusion/fusenet.hpp"
#include "fusion/gradcheck.hpp"
#include "fusion/metrics.hpp"
#include "fusion/synth.hpp"

using namespace fusion;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool ok,
            const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", id,
                name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Tensor random_tensor(const Shape& s, Rng& rng, double lo = -1, double hi = 1) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(s, std::move(v));
}

Parameter random_param(const std::string& n, const Shape& s, Rng& rng,
                       double lo = -1, double hi = 1) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Parameter(n, s, std::move(v));
}

Tensor random_dyadic(const Shape& s, Rng& rng) {
    std::vector<double> v(shape_numel(s));
    for (auto& x : v)
        x = static_cast<double>(rng.uniform_int(-(1 << 20), 1 << 20)) /
            static_cast<double>(1 << 20);
    return Tensor::from(s, std::move(v));
}

Tensor weighted(const Tensor& t, uint64_t seed) {
    Rng rng(seed);
    return sum_all(mul(t, random_tensor(t.shape(), rng)));
}

std::vector<std::pair<Tensor, Tensor>> make_corpus(int n, int size,
                                                   uint64_t seed) {
    std::vector<std::pair<Tensor, Tensor>> out;
    for (int i = 0; i < n; ++i) {
        Rng rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(i + 1));
        out.push_back(synth_pair(size, rng));
    }
    return out;
}

// training budgets frozen after the bring-up run of the FD-verified build
constexpr long long kSanitySteps = 200;
constexpr long long kCoverageSteps = 500;
constexpr long long kFusionSteps = 2400;
constexpr long long kAblationSteps = 200;

FusionConfig desk_config(uint64_t seed, long long steps) {
    FusionConfig cfg;
    cfg.width = 8;
    cfg.state = 4;
    cfg.experts = 4;
    cfg.top_k = 2;
    cfg.seed = seed;
    cfg.epochs = static_cast<int>((steps + 19) / 20);  // 20-pair corpus
    return cfg;
}

// ------------------------------------------------------------------ C1

// dense-unroll oracle for the selective scan (duplicated on purpose: the
// acceptance suite carries its own independent reference)
std::vector<double> dense_unroll(const Tensor& tokens, const SsmParams& p,
                                 const std::vector<int>& ord) {
    const int L = tokens.shape()[0], D = tokens.shape()[1], S = p.state;
    const auto& x = tokens.data();
    auto softplus_v = [](double v) {
        return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    };
    std::vector<double> delta(L), bs(L * S), cs(L * S);
    for (int q = 0; q < L; ++q) {
        int t = ord[q];
        double z = p.b_delta.values()[0];
        for (int d = 0; d < D; ++d) z += x[t * D + d] * p.w_delta.values()[d];
        delta[q] = softplus_v(z);
        for (int s = 0; s < S; ++s) {
            double b = p.b_b.values()[s], c = p.b_c.values()[s];
            for (int d = 0; d < D; ++d) {
                b += x[t * D + d] * p.w_b.values()[d * S + s];
                c += x[t * D + d] * p.w_c.values()[d * S + s];
            }
            bs[q * S + s] = b;
            cs[q * S + s] = c;
        }
    }
    std::vector<double> out(static_cast<size_t>(L) * D, 0.0);
    for (int d = 0; d < D; ++d)
        for (int pp = 0; pp < L; ++pp) {
            double y = p.skip.values()[d] * x[ord[pp] * D + d];
            for (int q = 0; q <= pp; ++q) {
                double mix = 0;
                for (int s = 0; s < S; ++s) {
                    double a = -std::exp(p.a_log.values()[d * S + s]);
                    double decay = 1.0;
                    for (int r = q + 1; r <= pp; ++r)
                        decay *= std::exp(delta[r] * a);
                    mix += cs[pp * S + s] * decay * delta[q] * bs[q * S + s];
                }
                y += mix * x[ord[q] * D + d];
            }
            out[static_cast<size_t>(ord[pp]) * D + d] = y;
        }
    return out;
}

void criterion_1() {
    double t0 = now_seconds();
    std::vector<std::pair<std::string, GradCheckReport>> reports;
    Rng rng(2024);

    {  // convolutions, layer norm, activations
        Parameter x = random_param("x", {2, 6, 6}, rng);
        Parameter kf = random_param("kf", {2, 2, 3, 3}, rng, -0.5, 0.5);
        Parameter kd = random_param("kd", {2, 3, 3}, rng, -0.5, 0.5);
        Parameter kp = random_param("kp", {3, 2}, rng, -0.5, 0.5);
        Parameter g = random_param("g", {2}, rng, 0.5, 1.5);
        Parameter b = random_param("b", {2}, rng, -0.2, 0.2);
        auto fn = [&]() {
            Tensor ln = layer_norm(x.tensor(), g.tensor(), b.tensor(), 1e-5);
            Tensor t = conv2d(ln, kf.tensor(), ConvKind::Full3x3);
            t = add(t, conv2d(ln, kd.tensor(), ConvKind::Depthwise3x3));
            Tensor u = conv2d(t, kp.tensor(), ConvKind::Pointwise1x1);
            Tensor act = add(add(gelu(u), silu(u)),
                             add(softplus_t(u), sigmoid_t(u)));
            return add(mean_all(act), mean_all(softmax_lastaxis(u)));
        };
        Rng probe(1);
        reports.push_back({"ops: conv/norm/activations",
                           grad_check(fn, {x, kf, kd, kp, g, b}, 8, 1e-4,
                                      1e-4, probe)});
    }
    {  // spectral ops
        Parameter x = random_param("x", {1, 4, 4}, rng, 0.1, 1.0);
        auto fn = [&]() {
            auto [amp, phase] = amp_phase(fft2(x.tensor()));
            ComplexTensor z = hermitian_symmetrize(
                recompose(mul(amp, softplus_t(amp)), scale(phase, 0.9)));
            return weighted(ifft2_real(z), 7);
        };
        Rng probe(2);
        reports.push_back({"ops: fft/amp/phase",
                           grad_check(fn, {x}, 0, 1e-5, 1e-4, probe)});
    }
    {  // selective scan, both directions
        ParamRegistry reg;
        SsmParams fwd = make_ssm_params(reg, "fwd", 3, 2, rng);
        SsmParams bwd = make_ssm_params(reg, "bwd", 3, 2, rng);
        Parameter tokens = random_param("tokens", {8, 3}, rng);
        auto fn = [&]() {
            return weighted(bidirectional_scan(tokens.tensor(), fwd, bwd,
                                               spatial_raster(2, 4)),
                            11);
        };
        std::vector<Parameter> params = reg.all();
        params.push_back(tokens);
        Rng probe(3);
        reports.push_back({"ops: selective scan",
                           grad_check(fn, params, 4, 1e-5, 1e-4, probe)});
    }
    {  // MAFE block
        ParamRegistry reg;
        Rng mrng(41);
        MafeConfig mcfg;
        mcfg.in_channels = 1;
        mcfg.width = 4;
        mcfg.state = 2;
        MafeParams p = make_mafe_params(reg, "mafe", mcfg, mrng);
        Parameter img = random_param("img", {1, 8, 8}, mrng, 0.05, 0.95);
        auto fn = [&]() { return weighted(mafe_forward(img.tensor(), p), 43); };
        std::vector<Parameter> params = reg.all();
        params.push_back(img);
        Rng probe(99);
        reports.push_back({"block: mafe",
                           grad_check(fn, params, 3, 1e-4, 1e-4, probe)});
    }
    {  // cross-modal expert
        ParamRegistry reg;
        Rng erng(101);
        MccmConfig ccfg;
        ccfg.feat_width = 2;
        ccfg.experts = 1;
        ccfg.top_k = 1;
        ccfg.state = 2;
        MccmParams p = make_mccm_params(reg, "mccm", ccfg, erng);
        Parameter f1 = random_param("f1", {2, 4, 4}, erng);
        Parameter f2 = random_param("f2", {2, 4, 4}, erng);
        auto fn = [&]() {
            return weighted(cm_expert(f1.tensor(), f2.tensor(), p.experts[0],
                                      ccfg),
                            103);
        };
        std::vector<Parameter> params = reg.all();
        params.push_back(f1);
        params.push_back(f2);
        Rng probe(107);
        reports.push_back({"block: cm_expert",
                           grad_check(fn, params, 3, 1e-4, 1e-4, probe)});
    }
    {  // BSCL losses
        Parameter f = random_param("f", {4, 4, 4}, rng);
        Parameter m1 = random_param("m1", {2, 4, 4}, rng);
        Parameter m2 = random_param("m2", {2, 4, 4}, rng);
        Parameter pf = random_param("pf", {1, 4, 8}, rng, 0.1, 0.9);
        Parameter pa = random_param("pa", {1, 4, 8}, rng, 0.1, 0.9);
        Parameter pb = random_param("pb", {1, 4, 8}, rng, 0.1, 0.9);
        auto fn = [&]() {
            return add(loss_fcl(f.tensor(), m1.tensor(), m2.tensor()),
                       loss_pcl(pf.tensor(), pa.tensor(), pb.tensor()));
        };
        Rng probe(4);
        reports.push_back({"block: bscl losses",
                           grad_check(fn, {f, m1, m2, pf, pa, pb}, 0, 1e-4,
                                      1e-4, probe)});
    }

    bool ops_ok = true;
    double worst_ops = 0;
    for (auto& [name, rep] : reports) {
        ops_ok = ops_ok && rep.passed();
        worst_ops = std::max(worst_ops, rep.worst());
        if (!rep.passed())
            std::printf("    %s FAILED\n%s", name.c_str(),
                        rep.table().c_str());
    }

    // full model, 16x16 / C=4 / S=2 / N=2, tolerance 1e-3. The objective is
    // piecewise smooth (max pooling, top-k, L1), so the FD step is small and
    // gradients below 1e-5 on an O(1) loss compare absolutely.
    FusionConfig cfg;
    cfg.width = 4;
    cfg.state = 2;
    cfg.experts = 2;
    cfg.top_k = 2;
    cfg.epochs = 4;
    cfg.seed = 17;
    FusionModel model = FusionModel::build(cfg);
    Rng srng(19);
    auto [a, b] = synth_pair(16, srng);
    auto fn = [&]() {
        Rng noise(23);
        FuseResult r = fuse_forward(a, b, model, &noise, true);
        LossBreakdown bd;
        return loss_total(r.f_mf, r.f_m1, r.f_m2, r.image, a, b, r.gate,
                          r.expert_outputs, cfg.weights, 2, cfg.epochs, &bd);
    };
    Rng probe(29);
    GradCheckReport full =
        grad_check(fn, model.params.all(), 2, 3e-6, 1e-3, probe, 1e-5);
    if (!full.passed()) std::printf("%s", full.table().c_str());

    double elapsed = now_seconds() - t0;
    bool ok = ops_ok && full.passed() && elapsed < 300.0;
    char detail[256];
    std::snprintf(detail, sizeof detail,
                  "ops worst %.2e (tol 1e-4), full model worst %.2e (tol "
                  "1e-3), runtime %.0f s (limit 300)",
                  worst_ops, full.worst(), elapsed);
    report(1, "gradient integrity", ok, detail);
}

// ------------------------------------------------------------------ C2

void criterion_2() {
    std::vector<std::string> bad;
    Rng rng(31);

    {  // fft round trip < 1e-9
        for (const Shape& s : {Shape{2, 8, 8}, Shape{1, 5, 7}}) {
            Tensor x = random_tensor(s, rng);
            Tensor back = ifft2_real(fft2(x));
            double err = 0;
            for (long long i = 0; i < x.numel(); ++i)
                err = std::max(err, std::fabs(back.at(i) - x.at(i)));
            if (!(err < 1e-9)) bad.push_back("fft round trip");
        }
    }
    {  // lifting reconstruction exact on dyadic data
        for (int axis : {0, 1, 2}) {
            Tensor x = random_dyadic({4, 6, 8}, rng);
            Tensor back = lift_merge(lift_split(x, axis));
            for (long long i = 0; i < x.numel(); ++i)
                if (back.at(i) != x.at(i)) {
                    bad.push_back("lifting reconstruction");
                    break;
                }
        }
    }
    {  // selective scan vs dense unroll < 1e-10
        ParamRegistry reg;
        SsmParams p = make_ssm_params(reg, "p", 3, 4, rng);
        Tensor tokens = random_tensor({12, 3}, rng);
        ScanOrder order = frequency_rotational(3, 4);
        Tensor y = selective_scan(tokens, p, order);
        auto oracle = dense_unroll(tokens, p, order.indices);
        for (long long i = 0; i < y.numel(); ++i)
            if (!(std::fabs(y.at(i) - oracle[i]) < 1e-10)) {
                bad.push_back("dense-unroll oracle");
                break;
            }
    }
    if (lambda_schedule(0, 7) != 1.0) bad.push_back("lambda(0)");
    if (lambda_schedule(7, 7) != 0.0) bad.push_back("lambda(T)");
    if (loss_wb(Tensor::from({4}, {0.5, 0.5, 0.0, 0.0})).item() != 1.0)
        bad.push_back("L_wb half-half");
    if (loss_wb(Tensor::from({4}, {1.0, 0.0, 0.0, 0.0})).item() != 3.0)
        bad.push_back("L_wb one-hot");
    {
        Tensor o = random_tensor({2, 3, 3}, rng);
        if (std::fabs(loss_div({o, o, o, o}).item() - 1.0) > 1e-12)
            bad.push_back("L_div identical");
        GateDecision onehot;
        onehot.selected = {0};
        onehot.weights_t = Tensor::from({2}, {1.0, 0.0});
        onehot.weights = onehot.weights_t.data();
        Tensor o2 = random_tensor({2, 3, 3}, rng);
        if (loss_cons({o, o2}, onehot).item() != 0.0)
            bad.push_back("L_cons one-hot");
    }
    {  // gate simplex with k = 2 nonzeros
        ParamRegistry reg;
        Rng grng(37);
        MccmConfig cfg;
        cfg.feat_width = 2;
        cfg.experts = 4;
        cfg.top_k = 2;
        cfg.state = 2;
        MccmParams p = make_mccm_params(reg, "m", cfg, grng);
        Rng noise(41);
        for (int trial = 0; trial < 10; ++trial) {
            GateDecision d = gate_decide(random_tensor({4, 4, 4}, noise), p,
                                         &noise, true);
            double sum = 0;
            int nz = 0;
            for (double w : d.weights) {
                sum += w;
                nz += w != 0.0;
            }
            if (std::fabs(sum - 1.0) > 1e-12 || nz != 2) {
                bad.push_back("gate simplex");
                break;
            }
        }
    }

    std::string detail = bad.empty() ? "all identities hold"
                                     : "failed: " + bad.front();
    report(2, "exact identities", bad.empty(), detail);
}

// ------------------------------------------------------------------ C3

void criterion_3() {
    std::vector<std::string> bad;
    FusionConfig cfg;
    if (cfg.experts != 4) bad.push_back("experts != 4");
    if (cfg.top_k != 2) bad.push_back("top_k != 2");
    if (cfg.weights.fcl != 0.8 || cfg.weights.pcl != 0.4 ||
        cfg.weights.mccm != 1.0 || cfg.weights.ssim != 1.0 ||
        cfg.weights.intensity != 1.0)
        bad.push_back("lambda weights");
    if (cfg.beta1 != 0.9) bad.push_back("beta1");
    if (cfg.lr != 2e-4) bad.push_back("initial rate");
    if (cfg.lr_halve_every != 1000) bad.push_back("halving window");
    double ratio = lr_at(1000, cfg.lr, cfg.lr_halve_every) /
                   lr_at(0, cfg.lr, cfg.lr_halve_every);
    if (std::fabs(ratio - 0.5) > 1e-12) bad.push_back("lr(1000)/lr(0)");

    // the default config materializes N = 4 experts
    FusionConfig small = cfg;
    small.width = 4;
    small.state = 2;
    FusionModel model = FusionModel::build(small);
    if (model.mccm.experts.size() != 4) bad.push_back("materialized experts");

    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "N=4, k=2, lambdas (0.8,0.4,1,1,1), beta1=0.9, lr0=2e-4, "
                  "lr(1000)/lr(0)=%.12f%s",
                  ratio, bad.empty() ? "" : (" — failed: " + bad.front()).c_str());
    report(3, "paper-pinned configuration", bad.empty(), detail);
}

// ------------------------------------------------------------------ C4

void criterion_4() {
    double t0 = now_seconds();
    auto pairs = make_corpus(20, 32, 42);

    FusionConfig cfg = desk_config(42, kSanitySteps);
    FusionModel model = FusionModel::build(cfg);
    TrainOptions opts;
    opts.max_steps = kSanitySteps;
    TrainResult r = train(model, pairs, opts);
    double ratio = r.final_total / r.initial_total;

    FusionConfig cfg2 = desk_config(42, kCoverageSteps);
    FusionModel model2 = FusionModel::build(cfg2);
    TrainOptions opts2;
    opts2.max_steps = kCoverageSteps;
    TrainResult r2 = train(model2, pairs, opts2);
    std::set<int> seen;
    for (const auto& rec : r2.log)
        for (int s : rec.selected) seen.insert(s);

    double elapsed = now_seconds() - t0;
    bool ok = ratio < 0.5 && seen.size() == 4 && elapsed < 900.0;
    char detail[220];
    std::snprintf(detail, sizeof detail,
                  "loss %.3f -> %.3f (ratio %.3f < 0.5), %zu/4 experts "
                  "selected over %lld steps, runtime %.0f s (limit 900)",
                  r.initial_total, r.final_total, ratio, seen.size(),
                  kCoverageSteps, elapsed);
    report(4, "training sanity", ok, detail);
}

// ------------------------------------------------------------------ C5+C6

struct ArmResult {
    double cc = 0, sf = 0;
};

ArmResult eval_model(const FusionModel& model,
                     const std::vector<std::pair<Tensor, Tensor>>& pairs) {
    ArmResult res;
    for (const auto& [a, b] : pairs) {
        FuseResult r = fuse_forward(a, b, model, nullptr, false);
        res.cc += metric_cc(r.image, a, b);
        res.sf += metric_sf(r.image);
    }
    res.cc /= pairs.size();
    res.sf /= pairs.size();
    return res;
}

FusionModel train_arm(const FusionConfig& cfg, long long steps,
                      const std::vector<std::pair<Tensor, Tensor>>& pairs) {
    FusionModel model = FusionModel::build(cfg);
    TrainOptions opts;
    opts.max_steps = steps;
    train(model, pairs, opts);
    return model;
}

void criterion_5(const std::vector<std::pair<Tensor, Tensor>>& train_pairs,
                 const std::vector<std::pair<Tensor, Tensor>>& eval_pairs) {
    FusionConfig cfg = desk_config(42, kFusionSteps);
    FusionModel model = train_arm(cfg, kFusionSteps, train_pairs);

    double cc_f = 0, cc_base = 0, sf_f = 0, sf_src = 0;
    for (const auto& [a, b] : eval_pairs) {
        FuseResult r = fuse_forward(a, b, model, nullptr, false);
        cc_f += metric_cc(r.image, a, b);
        // copying either input scores (1 + r(A,B)) / 2
        double r_ab = metric_cc(a, a, b) * 2.0 - 1.0;
        cc_base += (1.0 + r_ab) / 2.0;
        sf_f += metric_sf(r.image);
        sf_src += std::max(metric_sf(a), metric_sf(b));
    }
    double n = static_cast<double>(eval_pairs.size());
    cc_f /= n;
    cc_base /= n;
    sf_f /= n;
    sf_src /= n;

    bool ok = cc_f > cc_base && sf_f >= 0.9 * sf_src;
    char detail[220];
    std::snprintf(detail, sizeof detail,
                  "held-out mean CC %.3f > copy baseline %.3f; SF %.4f >= "
                  "0.9 x source max %.4f (ratio %.2f)",
                  cc_f, cc_base, sf_f, sf_src, sf_f / sf_src);
    report(5, "fusion behavior on synthetic complementarity", ok, detail);
}

void criterion_6(const std::vector<std::pair<Tensor, Tensor>>& train_pairs,
                 const std::vector<std::pair<Tensor, Tensor>>& eval_pairs) {
    const uint64_t seeds[3] = {42, 43, 44};
    auto run_arm = [&](const char* name, auto mutate) {
        ArmResult mean;
        for (uint64_t seed : seeds) {
            FusionConfig cfg = desk_config(seed, kAblationSteps);
            mutate(cfg);
            FusionModel model = train_arm(cfg, kAblationSteps, train_pairs);
            ArmResult r = eval_model(model, eval_pairs);
            mean.cc += r.cc / 3.0;
            mean.sf += r.sf / 3.0;
        }
        std::printf("    arm %-18s CC %.4f  SF %.4f\n", name, mean.cc,
                    mean.sf);
        std::fflush(stdout);
        return mean;
    };

    ArmResult full = run_arm("full", [](FusionConfig&) {});
    ArmResult no_bscl = run_arm("no-bscl", [](FusionConfig& c) {
        c.weights.fcl = 0.0;
        c.weights.pcl = 0.0;
    });
    ArmResult no_mccm = run_arm("no-mccm-loss", [](FusionConfig& c) {
        c.weights.mccm = 0.0;
    });
    ArmResult single = run_arm("single-direction", [](FusionConfig& c) {
        c.bidirectional = false;
    });

    bool ok = no_bscl.sf <= full.sf && no_bscl.cc <= full.cc &&
              no_mccm.sf <= full.sf && no_mccm.cc <= full.cc &&
              single.sf <= full.sf && single.cc <= full.cc;
    char detail[240];
    std::snprintf(detail, sizeof detail,
                  "full (CC %.4f, SF %.4f) vs no-bscl (%.4f, %.4f), "
                  "no-mccm-loss (%.4f, %.4f), single-dir (%.4f, %.4f)",
                  full.cc, full.sf, no_bscl.cc, no_bscl.sf, no_mccm.cc,
                  no_mccm.sf, single.cc, single.sf);
    report(6, "ablation direction checks", ok, detail);
}

// ------------------------------------------------------------------ C7

void criterion_7() {
    std::vector<std::string> bad;
    Rng rng(53);

    {  // SF / AG / CC / SCD loop oracles at 1e-12
        const int h = 9, w = 7;
        Tensor f = random_tensor({1, h, w}, rng, 0, 1);
        Tensor a = random_tensor({1, h, w}, rng, 0, 1);
        Tensor b = random_tensor({1, h, w}, rng, 0, 1);
        auto at = [&](const Tensor& t, int i, int j) {
            return t.at(i * w + j);
        };
        double rf = 0, cf = 0;
        for (int i = 0; i < h; ++i)
            for (int j = 1; j < w; ++j)
                rf += std::pow(at(f, i, j) - at(f, i, j - 1), 2);
        for (int i = 1; i < h; ++i)
            for (int j = 0; j < w; ++j)
                cf += std::pow(at(f, i, j) - at(f, i - 1, j), 2);
        double sf = std::sqrt(rf / (h * (w - 1)) + cf / ((h - 1) * w));
        if (std::fabs(metric_sf(f) - sf) > 1e-12) bad.push_back("SF oracle");

        double ag = 0;
        for (int i = 0; i + 1 < h; ++i)
            for (int j = 0; j + 1 < w; ++j) {
                double dx = at(f, i, j + 1) - at(f, i, j);
                double dy = at(f, i + 1, j) - at(f, i, j);
                ag += std::sqrt((dx * dx + dy * dy) / 2.0);
            }
        ag /= (h - 1) * (w - 1);
        if (std::fabs(metric_ag(f) - ag) > 1e-12) bad.push_back("AG oracle");

        auto pearson_loop = [&](const Tensor& x, const Tensor& y) {
            double mx = 0, my = 0;
            long long n = x.numel();
            for (long long i = 0; i < n; ++i) {
                mx += x.at(i);
                my += y.at(i);
            }
            mx /= n;
            my /= n;
            double sxy = 0, sxx = 0, syy = 0;
            for (long long i = 0; i < n; ++i) {
                sxy += (x.at(i) - mx) * (y.at(i) - my);
                sxx += (x.at(i) - mx) * (x.at(i) - mx);
                syy += (y.at(i) - my) * (y.at(i) - my);
            }
            return sxy / std::sqrt(sxx * syy);
        };
        double cc = 0.5 * (pearson_loop(f, a) + pearson_loop(f, b));
        if (std::fabs(metric_cc(f, a, b) - cc) > 1e-12)
            bad.push_back("CC oracle");

        std::vector<double> fmb(f.numel()), fma(f.numel());
        for (long long i = 0; i < f.numel(); ++i) {
            fmb[i] = f.at(i) - b.at(i);
            fma[i] = f.at(i) - a.at(i);
        }
        Tensor tfmb = Tensor::from(f.shape(), std::move(fmb));
        Tensor tfma = Tensor::from(f.shape(), std::move(fma));
        double scd = pearson_loop(tfmb, a) + pearson_loop(tfma, b);
        if (std::fabs(metric_scd(f, a, b) - scd) > 1e-12)
            bad.push_back("SCD oracle");
    }
    {  // SCD(A+B, A, B) = 2 exactly on grid-valued images
        std::vector<double> av(64), bv(64);
        for (auto& v : av) v = rng.uniform_int(0, 128) / 256.0;
        for (auto& v : bv) v = rng.uniform_int(0, 128) / 256.0;
        std::vector<double> sum(64);
        for (int i = 0; i < 64; ++i) sum[i] = av[i] + bv[i];
        Tensor a = Tensor::from({1, 8, 8}, std::move(av));
        Tensor b = Tensor::from({1, 8, 8}, std::move(bv));
        Tensor s = Tensor::from({1, 8, 8}, std::move(sum));
        if (metric_scd(s, a, b) != 2.0) bad.push_back("SCD sum identity");
    }
    {  // MI(x,x) = H(x); MS-SSIM(x,x) = 1
        Tensor x = random_tensor({1, 16, 16}, rng, 0, 1);
        std::vector<double> hist(256, 0.0);
        for (double v : x.data()) {
            int q = static_cast<int>(std::lround(v * 255.0));
            hist[std::clamp(q, 0, 255)] += 1.0;
        }
        double hval = 0;
        for (double c : hist)
            if (c > 0) {
                double p = c / x.numel();
                hval -= p * std::log(p);
            }
        if (std::fabs(metric_mi(x, x, x) - 2 * hval) > 1e-10)
            bad.push_back("MI self-information");
        Tensor big = random_tensor({1, 32, 32}, rng, 0, 1);
        if (metric_msssim(big, big, big) != 1.0)
            bad.push_back("MS-SSIM identity");
    }
    {  // symmetry and shift invariance
        Tensor f = random_tensor({1, 16, 16}, rng, 0, 0.5);
        Tensor a = random_tensor({1, 16, 16}, rng, 0, 0.5);
        Tensor b = random_tensor({1, 16, 16}, rng, 0, 0.5);
        if (std::fabs(metric_mi(f, a, b) - metric_mi(f, b, a)) > 1e-12 ||
            std::fabs(metric_cc(f, a, b) - metric_cc(f, b, a)) > 1e-12 ||
            std::fabs(metric_scd(f, a, b) - metric_scd(f, b, a)) > 1e-12 ||
            std::fabs(metric_msssim(f, a, b) - metric_msssim(f, b, a)) > 1e-12)
            bad.push_back("source symmetry");
        auto shift = [](const Tensor& t, double c) {
            std::vector<double> v = t.data();
            for (auto& x : v) x += c;
            return Tensor::from(t.shape(), std::move(v));
        };
        if (std::fabs(metric_sf(shift(f, 0.25)) - metric_sf(f)) > 1e-12 ||
            std::fabs(metric_ag(shift(f, 0.25)) - metric_ag(f)) > 1e-12 ||
            std::fabs(metric_cc(shift(f, 0.25), shift(a, 0.25),
                                shift(b, 0.25)) -
                      metric_cc(f, a, b)) > 1e-10 ||
            std::fabs(metric_scd(shift(f, 0.25), shift(a, 0.25),
                                 shift(b, 0.25)) -
                      metric_scd(f, a, b)) > 1e-10)
            bad.push_back("shift invariance");
    }

    std::string detail =
        bad.empty() ? "loop oracles, identities, and invariances all hold"
                    : "failed: " + bad.front();
    report(7, "metrics oracles", bad.empty(), detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();

    auto train_pairs = make_corpus(20, 32, 42);
    auto eval_pairs = make_corpus(20, 32, 777);
    criterion_5(train_pairs, eval_pairs);
    criterion_6(train_pairs, eval_pairs);
    criterion_7();

    std::printf("%d of 7 criteria failed\n", g_failures);
    return g_failures;
}
