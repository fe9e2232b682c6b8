// Command-line frontend: fuse image pairs, train toy models on the
// synthetic corpus, generate corpora, run gradient-check suites, and dump
// scan orders. Exit codes: 0 ok, 2 usage, 3 I/O, 4 shape/validation,
// 5 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fusion/fusenet.hpp"
#include "fusion/gradcheck.hpp"
#include "fusion/image_io.hpp"
#include "fusion/metrics.hpp"
#include "fusion/synth.hpp"

using namespace fusion;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void print_resolved(const std::string& cmd,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
    std::cerr << "resolved: command=" << cmd;
    for (const auto& [k, v] : kv) std::cerr << " " << k << "=" << v;
    std::cerr << "\n";
}

json metrics_json(const MetricReport& r) {
    return json{{"mi", r.mi},   {"sf", r.sf},   {"ag", r.ag},
                {"cc", r.cc},   {"scd", r.scd}, {"ms_ssim", r.ms_ssim}};
}

// ---------------------------------------------------------------- fuse

int cmd_fuse(const std::string& model_path, const std::string& path_a,
             const std::string& path_b, const std::string& out_path,
             uint64_t seed) {
    print_resolved("fuse", {{"model", model_path},
                            {"input_a", path_a},
                            {"input_b", path_b},
                            {"out", out_path},
                            {"seed", std::to_string(seed)}});
    LoadedCheckpoint ckpt = load_checkpoint(model_path);
    Tensor raw_a = read_image(path_a);
    Tensor raw_b = read_image(path_b);
    if (raw_a.shape()[1] != raw_b.shape()[1] ||
        raw_a.shape()[2] != raw_b.shape()[2])
        throw ShapeError("input images differ in size: " +
                         shape_str(raw_a.shape()) + " vs " +
                         shape_str(raw_b.shape()));
    Tensor luma_a = to_luminance(raw_a);
    Tensor luma_b = to_luminance(raw_b);

    FuseResult r = fuse_forward(luma_a, luma_b, ckpt.model, nullptr, false);

    // color inputs keep the first modality's chrominance
    Tensor out_img = raw_a.shape()[0] == 3 ? recolor(r.image, raw_a) : r.image;
    write_image(out_path, out_img);

    MetricReport report = evaluate_metrics(r.image, luma_a, luma_b);
    json side{{"inputs", {path_a, path_b}},
              {"output", out_path},
              {"metrics", metrics_json(report)}};
    std::string side_path = out_path + ".json";
    std::ofstream side_out(side_path);
    if (!side_out) throw IoError("cannot write metrics sidecar: " + side_path);
    side_out << side.dump(2) << "\n";
    std::cout << side.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

int cmd_train(const std::string& config_path, const std::string& corpus_dir,
              const std::string& out_dir, long long steps,
              const std::string& resume_path, const std::string& eval_dir) {
    FusionConfig cfg = config_path.empty() ? FusionConfig{}
                                           : FusionConfig::from_file(config_path);
    print_resolved("train", {{"config", config_path.empty() ? "(defaults)"
                                                            : config_path},
                             {"corpus", corpus_dir},
                             {"out", out_dir},
                             {"steps", std::to_string(steps)},
                             {"seed", std::to_string(cfg.seed)}});
    fs::create_directories(out_dir);
    auto pairs = load_corpus(corpus_dir);

    FusionModel model = FusionModel::build(cfg);
    TrainState state;
    state.rng.reseed(cfg.seed);
    if (!resume_path.empty()) {
        LoadedCheckpoint ckpt = load_checkpoint(resume_path);
        if (!ckpt.has_train_state)
            throw UsageError("checkpoint has no training state to resume: " +
                             resume_path);
        model = std::move(ckpt.model);
        state = std::move(ckpt.train_state);
    }

    if (steps == 0) {  // emit the initialized model without training
        if (state.opt.m.empty()) state.opt.init(model.params);
        save_checkpoint((fs::path(out_dir) / "final.ckpt").string(), model,
                        &state);
        std::cout << json{{"steps", 0}}.dump() << "\n";
        return 0;
    }

    TrainOptions opts;
    opts.log_path = (fs::path(out_dir) / "log.jsonl").string();
    opts.checkpoint_dir = out_dir;
    if (steps > 0) opts.max_steps = steps;
    TrainResult result = train(model, pairs, opts, &state);

    json summary{{"steps", result.log.size()},
                 {"initial_total", result.initial_total},
                 {"final_total", result.final_total}};

    if (!eval_dir.empty()) {
        auto eval_pairs = load_corpus(eval_dir);
        json per_pair = json::array();
        MetricReport mean{};
        for (const auto& [a, b] : eval_pairs) {
            FuseResult r = fuse_forward(a, b, model, nullptr, false);
            MetricReport m = evaluate_metrics(r.image, a, b);
            per_pair.push_back(metrics_json(m));
            mean.mi += m.mi;
            mean.sf += m.sf;
            mean.ag += m.ag;
            mean.cc += m.cc;
            mean.scd += m.scd;
            mean.ms_ssim += m.ms_ssim;
        }
        double n = static_cast<double>(eval_pairs.size());
        mean.mi /= n;
        mean.sf /= n;
        mean.ag /= n;
        mean.cc /= n;
        mean.scd /= n;
        mean.ms_ssim /= n;
        json eval{{"pairs", per_pair}, {"mean", metrics_json(mean)}};
        std::ofstream out((fs::path(out_dir) / "eval.json").string());
        out << eval.dump(2) << "\n";
        summary["eval_mean"] = metrics_json(mean);
    }
    std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const std::string& out_dir, int count, int size, uint64_t seed) {
    print_resolved("synth", {{"out", out_dir},
                             {"count", std::to_string(count)},
                             {"size", std::to_string(size)},
                             {"seed", std::to_string(seed)}});
    if (count < 1 || size < 4)
        throw UsageError("synth: count must be >= 1 and size >= 4");
    generate_corpus(out_dir, count, size, seed);
    std::cout << json{{"pairs", count}, {"size", size}}.dump() << "\n";
    return 0;
}

// ------------------------------------------------------------ gradcheck

struct SuiteResult {
    std::string name;
    GradCheckReport report;
};

std::vector<SuiteResult> gradcheck_ops(uint64_t seed) {
    std::vector<SuiteResult> out;
    Rng rng(seed);

    {
        Parameter x("x", {2, 6, 6}, [&] {
            std::vector<double> v(72);
            for (auto& e : v) e = rng.uniform(-1, 1);
            return v;
        }());
        Parameter kf("kf", {2, 2, 3, 3}, [&] {
            std::vector<double> v(36);
            for (auto& e : v) e = rng.uniform(-0.5, 0.5);
            return v;
        }());
        Parameter kd("kd", {2, 3, 3}, [&] {
            std::vector<double> v(18);
            for (auto& e : v) e = rng.uniform(-0.5, 0.5);
            return v;
        }());
        Parameter kp("kp", {3, 2}, [&] {
            std::vector<double> v(6);
            for (auto& e : v) e = rng.uniform(-0.5, 0.5);
            return v;
        }());
        Parameter g("g", {2}, {1.1, 0.9});
        Parameter b("b", {2}, {0.05, -0.1});
        auto fn = [&]() {
            Tensor ln = layer_norm(x.tensor(), g.tensor(), b.tensor(), 1e-5);
            Tensor t = conv2d(ln, kf.tensor(), ConvKind::Full3x3);
            t = add(t, conv2d(ln, kd.tensor(), ConvKind::Depthwise3x3));
            Tensor u = conv2d(t, kp.tensor(), ConvKind::Pointwise1x1);
            return mean_all(add(gelu(u), silu(u)));
        };
        Rng probe(seed + 1);
        out.push_back({"conv+norm+activations",
                       grad_check(fn, {x, kf, kd, kp, g, b}, 6, 1e-4, 1e-4,
                                  probe)});
    }
    {
        Parameter x("x", {1, 4, 4}, [&] {
            std::vector<double> v(16);
            for (auto& e : v) e = rng.uniform(0.1, 1.0);
            return v;
        }());
        auto fn = [&]() {
            auto [amp, phase] = amp_phase(fft2(x.tensor()));
            ComplexTensor z = hermitian_symmetrize(
                recompose(mul(amp, softplus_t(amp)), scale(phase, 0.9)));
            Tensor back = ifft2_real(z);
            Rng lrng(7);
            std::vector<double> w(back.numel());
            for (auto& e : w) e = lrng.uniform(-1, 1);
            return sum_all(mul(back, Tensor::from(back.shape(), std::move(w))));
        };
        Rng probe(seed + 2);
        out.push_back({"spectral path", grad_check(fn, {x}, 0, 1e-5, 1e-4,
                                                   probe)});
    }
    {
        ParamRegistry reg;
        SsmParams fwd = make_ssm_params(reg, "fwd", 3, 2, rng);
        SsmParams bwd = make_ssm_params(reg, "bwd", 3, 2, rng);
        Parameter tokens("tokens", {8, 3}, [&] {
            std::vector<double> v(24);
            for (auto& e : v) e = rng.uniform(-1, 1);
            return v;
        }());
        auto fn = [&]() {
            Tensor y = bidirectional_scan(tokens.tensor(), fwd, bwd,
                                          spatial_raster(2, 4));
            Rng lrng(11);
            std::vector<double> w(y.numel());
            for (auto& e : w) e = lrng.uniform(-1, 1);
            return sum_all(mul(y, Tensor::from(y.shape(), std::move(w))));
        };
        std::vector<Parameter> params = reg.all();
        params.push_back(tokens);
        Rng probe(seed + 3);
        out.push_back({"selective scan",
                       grad_check(fn, params, 4, 1e-5, 1e-4, probe)});
    }
    return out;
}

std::vector<SuiteResult> gradcheck_mafe(uint64_t seed) {
    ParamRegistry reg;
    Rng rng(41);  // instance pinned alongside the unit suite
    MafeConfig cfg;
    cfg.in_channels = 1;
    cfg.width = 4;
    cfg.state = 2;
    MafeParams p = make_mafe_params(reg, "mafe", cfg, rng);
    Parameter img("img", {1, 8, 8}, [&] {
        std::vector<double> v(64);
        for (auto& e : v) e = rng.uniform(0.05, 0.95);
        return v;
    }());
    auto fn = [&]() {
        Tensor y = mafe_forward(img.tensor(), p);
        Rng lrng(43);
        std::vector<double> w(y.numel());
        for (auto& e : w) e = lrng.uniform(-1, 1);
        return sum_all(mul(y, Tensor::from(y.shape(), std::move(w))));
    };
    std::vector<Parameter> params = reg.all();
    params.push_back(img);
    Rng probe(seed + 57);
    return {{"mafe block", grad_check(fn, params, 3, 1e-4, 1e-4, probe)}};
}

std::vector<SuiteResult> gradcheck_mccm(uint64_t seed) {
    ParamRegistry reg;
    Rng rng(83);
    MccmConfig cfg;
    cfg.feat_width = 2;
    cfg.experts = 3;
    cfg.top_k = 2;
    cfg.state = 2;
    MccmParams p = make_mccm_params(reg, "mccm", cfg, rng);
    auto& wg = p.gate.w_g.values();
    std::fill(wg.begin(), wg.end(), 0.0);
    wg[0] = 2.0;
    wg[1] = 1.0;
    wg[2] = -1.0;  // separated logits keep the selection stable under probes
    Parameter f1("f1", {2, 4, 4}, [&] {
        std::vector<double> v(32);
        for (auto& e : v) e = rng.uniform(0.2, 0.8);
        return v;
    }());
    Parameter f2("f2", {2, 4, 4}, [&] {
        std::vector<double> v(32);
        for (auto& e : v) e = rng.uniform(0.2, 0.8);
        return v;
    }());
    auto fn = [&]() {
        Rng noise(89);
        MccmResult r = mccm_forward(f1.tensor(), f2.tensor(), p, &noise, true);
        MccmLossParts parts = loss_mccm(r.gate, r.expert_outputs, 3, 10);
        return parts.total;
    };
    std::vector<Parameter> params = reg.all();
    params.push_back(f1);
    params.push_back(f2);
    Rng probe(seed + 58);
    return {{"mccm losses", grad_check(fn, params, 2, 1e-4, 1e-4, probe)}};
}

std::vector<SuiteResult> gradcheck_bscl(uint64_t seed) {
    Rng rng(19);
    auto mk = [&](const char* name, const Shape& s, double lo, double hi) {
        std::vector<double> v(shape_numel(s));
        for (auto& e : v) e = rng.uniform(lo, hi);
        return Parameter(name, s, std::move(v));
    };
    Parameter f = mk("f", {4, 4, 4}, -1, 1);
    Parameter m1 = mk("m1", {2, 4, 4}, -1, 1);
    Parameter m2 = mk("m2", {2, 4, 4}, -1, 1);
    Parameter pf = mk("pf", {1, 4, 8}, 0.1, 0.9);
    Parameter pa = mk("pa", {1, 4, 8}, 0.1, 0.9);
    Parameter pb = mk("pb", {1, 4, 8}, 0.1, 0.9);
    std::vector<SuiteResult> out;
    Rng probe(seed + 59);
    out.push_back(
        {"feature contrastive",
         grad_check([&]() { return loss_fcl(f.tensor(), m1.tensor(),
                                            m2.tensor()); },
                    {f, m1, m2}, 0, 1e-4, 1e-4, probe)});
    out.push_back(
        {"pixel contrastive",
         grad_check([&]() { return loss_pcl(pf.tensor(), pa.tensor(),
                                            pb.tensor()); },
                    {pf, pa, pb}, 0, 1e-4, 1e-4, probe)});
    return out;
}

std::vector<SuiteResult> gradcheck_full(uint64_t seed) {
    FusionConfig cfg;
    cfg.width = 4;
    cfg.state = 2;
    cfg.experts = 2;
    cfg.top_k = 2;
    cfg.epochs = 4;
    cfg.seed = 17;
    FusionModel model = FusionModel::build(cfg);
    Rng rng(19);
    auto [a, b] = synth_pair(16, rng);
    auto fn = [&]() {
        Rng noise(23);
        FuseResult r = fuse_forward(a, b, model, &noise, true);
        LossBreakdown bd;
        return loss_total(r.f_mf, r.f_m1, r.f_m2, r.image, a, b, r.gate,
                          r.expert_outputs, cfg.weights, 2, cfg.epochs, &bd);
    };
    Rng probe(seed + 60);
    return {{"full model",
             grad_check(fn, model.params.all(), 2, 3e-6, 1e-3, probe, 1e-5)}};
}

std::vector<SuiteResult> gradcheck_negative(uint64_t seed) {
    // deliberately corrupted backward; this suite must FAIL
    Parameter p("p", {3}, {1.0, 2.0, -1.5});
    auto corrupted_square = [](const Tensor& x) {
        std::vector<double> v(x.numel());
        for (long long i = 0; i < x.numel(); ++i) v[i] = x.at(i) * x.at(i);
        return make_op(x.shape(), std::move(v), {x}, [](Node& n) {
            Node* q = n.parents[0].get();
            double* g = q->grad_data();
            for (size_t i = 0; i < q->value.size(); ++i)
                g[i] += 1.01 * 2.0 * q->value[i] * n.grad[i];
        });
    };
    auto fn = [&]() { return sum_all(corrupted_square(p.tensor())); };
    Rng probe(seed + 61);
    return {{"negative control (expected to fail)",
             grad_check(fn, {p}, 0, 1e-4, 1e-4, probe)}};
}

int cmd_gradcheck(const std::string& scope, uint64_t seed) {
    print_resolved("gradcheck", {{"scope", scope},
                                 {"seed", std::to_string(seed)}});
    std::vector<SuiteResult> suites;
    if (scope == "ops") suites = gradcheck_ops(seed);
    else if (scope == "mafe") suites = gradcheck_mafe(seed);
    else if (scope == "mccm") suites = gradcheck_mccm(seed);
    else if (scope == "bscl") suites = gradcheck_bscl(seed);
    else if (scope == "full") suites = gradcheck_full(seed);
    else if (scope == "negative") suites = gradcheck_negative(seed);
    else
        throw UsageError("unknown gradcheck scope '" + scope +
                         "' (ops|mafe|mccm|bscl|full|negative)");
    bool all_ok = true;
    for (const auto& s : suites) {
        bool ok = s.report.passed();
        all_ok = all_ok && ok;
        std::printf("%-34s %s  worst %.3e (tol %.0e)\n", s.name.c_str(),
                    ok ? "PASS" : "FAIL", s.report.worst(),
                    s.report.tolerance);
        std::fputs(s.report.table().c_str(), stdout);
    }
    if (!all_ok) throw NumericError("gradient check failed");
    return 0;
}

// ------------------------------------------------------------ scan-dump

int cmd_scan_dump(const std::string& kind, int h, int w) {
    print_resolved("scan-dump", {{"kind", kind},
                                 {"h", std::to_string(h)},
                                 {"w", std::to_string(w)}});
    ScanOrder order;
    if (kind == "spatial") order = spatial_raster(h, w);
    else if (kind == "channel") order = channel_order(h);
    else if (kind == "freq-rot") order = frequency_rotational(h, w);
    else if (kind == "cross-modal")
        order = cross_modal_interleave(spatial_raster(h, w),
                                       spatial_raster(h, w));
    else
        throw UsageError("unknown scan kind '" + kind +
                         "' (spatial|channel|freq-rot|cross-modal)");
    if (order.cross_modal()) {
        json obj{{"indices", order.indices}, {"tags", order.tags}};
        std::cout << obj.dump() << "\n";
    } else {
        std::cout << json(order.indices).dump() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"general image fusion toolkit"};
    app.require_subcommand(1);

    std::string model_path, path_a, path_b, out_path;
    uint64_t seed = 42;

    auto* fuse = app.add_subcommand("fuse", "fuse two images with a model");
    fuse->add_option("--model", model_path, "checkpoint path")->required();
    fuse->add_option("--input-a", path_a, "first image (PGM/PPM)")->required();
    fuse->add_option("--input-b", path_b, "second image (PGM/PPM)")->required();
    fuse->add_option("--out", out_path, "fused image path")->required();
    fuse->add_option("--seed", seed, "rng seed");

    std::string config_path, corpus_dir, out_dir, resume_path, eval_dir;
    long long steps = -1;
    auto* tr = app.add_subcommand("train", "train on a corpus of pairs");
    tr->add_option("--config", config_path, "key=value config file");
    tr->add_option("--corpus", corpus_dir, "directory of pair_NNNN_{a,b}.pgm")
        ->required();
    tr->add_option("--out", out_dir, "output directory")->required();
    tr->add_option("--steps", steps,
                   "step budget (0 saves the untrained model; default "
                   "epochs*pairs)");
    tr->add_option("--resume", resume_path, "checkpoint to continue from");
    tr->add_option("--eval-dir", eval_dir, "held-out pairs for a final report");

    std::string synth_dir;
    int count = 16, size = 32;
    auto* sy = app.add_subcommand("synth", "generate the synthetic corpus");
    sy->add_option("--out", synth_dir, "output directory")->required();
    sy->add_option("--count", count, "number of pairs");
    sy->add_option("--size", size, "image side length");
    sy->add_option("--seed", seed, "rng seed");

    std::string scope = "ops";
    auto* gc = app.add_subcommand("gradcheck", "finite-difference suites");
    gc->add_option("--scope", scope, "ops|mafe|mccm|bscl|full|negative");
    gc->add_option("--seed", seed, "rng seed");

    std::string kind;
    int sh = 2, sw = 2;
    auto* sd = app.add_subcommand("scan-dump", "print a scan order as JSON");
    sd->add_option("--kind", kind, "spatial|channel|freq-rot|cross-modal")
        ->required();
    sd->add_option("--height", sh, "grid height (token count for channel)");
    sd->add_option("--width", sw, "grid width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fuse->parsed())
            return cmd_fuse(model_path, path_a, path_b, out_path, seed);
        if (tr->parsed())
            return cmd_train(config_path, corpus_dir, out_dir, steps,
                             resume_path, eval_dir);
        if (sy->parsed()) return cmd_synth(synth_dir, count, size, seed);
        if (gc->parsed()) return cmd_gradcheck(scope, seed);
        if (sd->parsed()) return cmd_scan_dump(kind, sh, sw);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
