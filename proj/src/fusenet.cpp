#include "fusion/fusenet.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fusion {

void FusionConfig::validate() const {
    if (width < 2 || width % 2 != 0)
        throw UsageError("config: width must be even and >= 2");
    if (state < 1) throw UsageError("config: state must be >= 1");
    if (experts < 1) throw UsageError("config: experts must be >= 1");
    if (top_k < 1 || top_k > experts)
        throw UsageError("config: top_k must be in [1, experts]");
    if (weights.fcl < 0 || weights.pcl < 0 || weights.mccm < 0 ||
        weights.ssim < 0 || weights.intensity < 0)
        throw UsageError("config: loss weights must be >= 0");
    if (lr <= 0) throw UsageError("config: lr must be > 0");
    if (lr_halve_every < 1)
        throw UsageError("config: lr_halve_every must be >= 1");
    if (epochs < 1) throw UsageError("config: epochs must be >= 1");
    if (ln_eps <= 0) throw UsageError("config: ln_eps must be > 0");
}

std::string FusionConfig::to_key_values() const {
    std::ostringstream os;
    os.precision(17);
    os << "width=" << width << "\n";
    os << "state=" << state << "\n";
    os << "experts=" << experts << "\n";
    os << "top_k=" << top_k << "\n";
    os << "lambda_fcl=" << weights.fcl << "\n";
    os << "lambda_pcl=" << weights.pcl << "\n";
    os << "lambda_mccm=" << weights.mccm << "\n";
    os << "lambda_ssim=" << weights.ssim << "\n";
    os << "lambda_int=" << weights.intensity << "\n";
    os << "lr=" << lr << "\n";
    os << "beta1=" << beta1 << "\n";
    os << "beta2=" << beta2 << "\n";
    os << "adam_eps=" << adam_eps << "\n";
    os << "lr_halve_every=" << lr_halve_every << "\n";
    os << "epochs=" << epochs << "\n";
    os << "seed=" << seed << "\n";
    os << "bidirectional=" << (bidirectional ? 1 : 0) << "\n";
    os << "use_mafe=" << (use_mafe ? 1 : 0) << "\n";
    os << "checkpoint_every=" << checkpoint_every << "\n";
    os << "ln_eps=" << ln_eps << "\n";
    os << "head_width=" << head_width << "\n";
    return os.str();
}

FusionConfig FusionConfig::from_key_values(const std::string& text) {
    FusionConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) +
                             ": expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto te = key.find_last_not_of(" \t");
        key = key.substr(0, te + 1);
        auto vb = val.find_first_not_of(" \t");
        val = vb == std::string::npos ? "" : val.substr(vb);
        try {
            if (key == "width") cfg.width = std::stoi(val);
            else if (key == "state") cfg.state = std::stoi(val);
            else if (key == "experts") cfg.experts = std::stoi(val);
            else if (key == "top_k") cfg.top_k = std::stoi(val);
            else if (key == "lambda_fcl") cfg.weights.fcl = std::stod(val);
            else if (key == "lambda_pcl") cfg.weights.pcl = std::stod(val);
            else if (key == "lambda_mccm") cfg.weights.mccm = std::stod(val);
            else if (key == "lambda_ssim") cfg.weights.ssim = std::stod(val);
            else if (key == "lambda_int") cfg.weights.intensity = std::stod(val);
            else if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "beta1") cfg.beta1 = std::stod(val);
            else if (key == "beta2") cfg.beta2 = std::stod(val);
            else if (key == "adam_eps") cfg.adam_eps = std::stod(val);
            else if (key == "lr_halve_every") cfg.lr_halve_every = std::stoi(val);
            else if (key == "epochs") cfg.epochs = std::stoi(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "bidirectional") cfg.bidirectional = std::stoi(val) != 0;
            else if (key == "use_mafe") cfg.use_mafe = std::stoi(val) != 0;
            else if (key == "checkpoint_every") cfg.checkpoint_every = std::stoi(val);
            else if (key == "ln_eps") cfg.ln_eps = std::stod(val);
            else if (key == "head_width") cfg.head_width = std::stoi(val);
            else
                throw UsageError("config line " + std::to_string(lineno) +
                                 ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw UsageError("config line " + std::to_string(lineno) +
                             ": bad value for '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

FusionConfig FusionConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_key_values(ss.str());
}

FusionModel FusionModel::build(const FusionConfig& cfg) {
    cfg.validate();
    FusionModel m;
    m.cfg = cfg;
    Rng rng(cfg.seed);

    MafeConfig mc;
    mc.in_channels = 1;
    mc.width = cfg.width;
    mc.state = cfg.state;
    mc.bidirectional = cfg.bidirectional;
    mc.ln_eps = cfg.ln_eps;
    if (cfg.use_mafe) {
        m.mafe1 = make_mafe_params(m.params, "mafe1", mc, rng);
        m.mafe2 = make_mafe_params(m.params, "mafe2", mc, rng);
    }

    MccmConfig xc;
    xc.feat_width = 2 * cfg.width;
    xc.experts = cfg.experts;
    xc.top_k = cfg.top_k;
    xc.state = cfg.state;
    xc.bidirectional = cfg.bidirectional;
    xc.ln_eps = cfg.ln_eps;
    m.mccm = make_mccm_params(m.params, "mccm", xc, rng);

    int fused_w = 4 * cfg.width;  // expert output width
    int hw = cfg.head_width > 0 ? cfg.head_width : cfg.width;
    double b1 = 1.0 / std::sqrt(fused_w * 9.0);
    double b2 = 1.0 / std::sqrt(hw * 9.0);
    double b3 = 1.0 / std::sqrt(static_cast<double>(hw));
    m.head_w1 = m.params.create_uniform("head.w1", {hw, fused_w, 3, 3}, rng, -b1, b1);
    m.head_b1 = m.params.create_const("head.b1", {hw}, 0.0);
    m.head_w2 = m.params.create_uniform("head.w2", {hw, hw, 3, 3}, rng, -b2, b2);
    m.head_b2 = m.params.create_const("head.b2", {hw}, 0.0);
    m.head_w3 = m.params.create_uniform("head.w3", {1, hw}, rng, -b3, b3);
    m.head_b3 = m.params.create_const("head.b3", {1}, 0.0);
    return m;
}

namespace {
void check_input_image(const Tensor& img, const char* name) {
    if (img.rank() != 3 || img.shape()[0] != 1)
        throw ShapeError(std::string(name) + ": expected [1,H,W], got " +
                         shape_str(img.shape()));
    int h = img.shape()[1], w = img.shape()[2];
    if (h < 16 || w < 16 || h % 2 != 0 || w % 2 != 0)
        throw ShapeError(std::string(name) + ": H and W must be even and >= 16, got " +
                         std::to_string(h) + "x" + std::to_string(w));
    for (double v : img.data())
        if (!(v >= 0.0 && v <= 1.0))
            throw ShapeError(std::string(name) + ": values must lie in [0,1]");
}

Tensor tile_image(const Tensor& img, int copies) {
    std::vector<Tensor> reps(copies, img);
    return concat(reps, 0);
}
}  // namespace

FuseResult fuse_forward(const Tensor& a, const Tensor& b,
                        const FusionModel& model, Rng* rng, bool train) {
    check_input_image(a, "input A");
    check_input_image(b, "input B");
    if (a.shape() != b.shape())
        throw ShapeError("input images differ in size: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));

    FuseResult r;
    if (model.cfg.use_mafe) {
        r.f_m1 = mafe_forward(a, model.mafe1);
        r.f_m2 = mafe_forward(b, model.mafe2);
    } else {
        r.f_m1 = tile_image(a, 2 * model.cfg.width);
        r.f_m2 = tile_image(b, 2 * model.cfg.width);
    }

    MccmResult mr = mccm_forward(r.f_m1, r.f_m2, model.mccm, rng, train);
    r.f_mf = mr.fused;
    r.gate = std::move(mr.gate);
    r.expert_outputs = std::move(mr.expert_outputs);

    Tensor h1 = silu(conv2d(r.f_mf, model.head_w1.tensor(), ConvKind::Full3x3,
                            model.head_b1.tensor()));
    Tensor h2 = silu(conv2d(h1, model.head_w2.tensor(), ConvKind::Full3x3,
                            model.head_b2.tensor()));
    r.image = sigmoid_t(conv2d(h2, model.head_w3.tensor(),
                               ConvKind::Pointwise1x1, model.head_b3.tensor()));
    return r;
}

double lr_at(long long step, double lr0, int halve_every) {
    long long window = step / halve_every;
    double frac = static_cast<double>(step % halve_every) / halve_every;
    double start = lr0 * std::pow(0.5, static_cast<double>(window));
    return start * (0.75 + 0.25 * std::cos(M_PI * frac));
}

void AdamState::init(const ParamRegistry& params) {
    m.clear();
    v.clear();
    for (const auto& p : params.all()) {
        m.emplace_back(p.numel(), 0.0);
        v.emplace_back(p.numel(), 0.0);
    }
    t = 0;
}

void adam_step(ParamRegistry& params, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    auto& ps = params.all();
    if (state.m.size() != ps.size())
        throw UsageError("adam state does not match parameter registry");
    ++state.t;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < ps.size(); ++i) {
        auto& val = ps[i].values();
        const auto& g = ps[i].grad();
        auto& mi = state.m[i];
        auto& vi = state.v[i];
        for (size_t j = 0; j < val.size(); ++j) {
            mi[j] = beta1 * mi[j] + (1.0 - beta1) * g[j];
            vi[j] = beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j];
            double mhat = mi[j] / bc1;
            double vhat = vi[j] / bc2;
            val[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::string TrainRecord::to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"step\":" << step << ",\"epoch\":" << epoch << ",\"lr\":" << lr
       << ",\"total\":" << losses.total << ",\"fcl\":" << losses.fcl
       << ",\"pcl\":" << losses.pcl << ",\"mccm\":" << losses.mccm
       << ",\"wb\":" << losses.wb << ",\"div\":" << losses.divr
       << ",\"cons\":" << losses.cons << ",\"ssim\":" << losses.ssim
       << ",\"int\":" << losses.intensity << ",\"lambda\":" << losses.lambda
       << ",\"gate\":[";
    for (size_t i = 0; i < gate_weights.size(); ++i)
        os << (i ? "," : "") << gate_weights[i];
    os << "],\"selected\":[";
    for (size_t i = 0; i < selected.size(); ++i)
        os << (i ? "," : "") << selected[i];
    os << "]}";
    return os.str();
}

namespace {
void check_component_finite(double v, const char* name, long long step) {
    if (!std::isfinite(v))
        throw NumericError(std::string("training aborted: ") + name +
                           " is non-finite at step " + std::to_string(step));
}
}  // namespace

TrainResult train(FusionModel& model,
                  const std::vector<std::pair<Tensor, Tensor>>& pairs,
                  const TrainOptions& opts, TrainState* state) {
    if (pairs.empty()) throw UsageError("train: empty dataset");
    const FusionConfig& cfg = model.cfg;
    const long long npairs = static_cast<long long>(pairs.size());
    const long long total_steps =
        opts.max_steps > 0 ? opts.max_steps
                           : static_cast<long long>(cfg.epochs) * npairs;

    TrainState local;
    if (!state) {
        local.rng.reseed(cfg.seed);
        state = &local;
    }
    if (state->opt.m.empty()) state->opt.init(model.params);

    std::ofstream log;
    if (!opts.log_path.empty()) {
        log.open(opts.log_path, state->step > 0 ? std::ios::app
                                                : std::ios::trunc);
        if (!log) throw IoError("cannot open training log: " + opts.log_path);
        log.precision(17);
    }

    TrainResult result;
    while (state->step < total_steps) {
        const long long s = state->step;
        const int epoch = static_cast<int>(s / npairs) + 1;
        const int t = std::min(epoch, cfg.epochs);
        const auto& [img_a, img_b] = pairs[s % npairs];

        FuseResult fr = fuse_forward(img_a, img_b, model, &state->rng, true);
        LossBreakdown bd;
        Tensor loss =
            loss_total(fr.f_mf, fr.f_m1, fr.f_m2, fr.image, img_a, img_b,
                       fr.gate, fr.expert_outputs, cfg.weights, t, cfg.epochs,
                       &bd);
        check_component_finite(bd.fcl, "loss_fcl", s + 1);
        check_component_finite(bd.pcl, "loss_pcl", s + 1);
        check_component_finite(bd.mccm, "loss_mccm", s + 1);
        check_component_finite(bd.ssim, "loss_ssim", s + 1);
        check_component_finite(bd.intensity, "loss_int", s + 1);
        check_component_finite(bd.total, "loss_total", s + 1);

        model.params.zero_grads();
        backward(loss);
        double lr = lr_at(s, cfg.lr, cfg.lr_halve_every);
        adam_step(model.params, state->opt, lr, cfg.beta1, cfg.beta2,
                  cfg.adam_eps);
        state->step = s + 1;

        TrainRecord rec;
        rec.step = s + 1;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.losses = bd;
        rec.gate_weights = fr.gate.weights;
        rec.selected = fr.gate.selected;
        if (log) log << rec.to_json() << "\n";
        if (result.log.empty()) result.initial_total = bd.total;
        result.final_total = bd.total;
        result.log.push_back(std::move(rec));

        if (!opts.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
            state->step % cfg.checkpoint_every == 0) {
            std::filesystem::create_directories(opts.checkpoint_dir);
            save_checkpoint(opts.checkpoint_dir + "/step_" +
                                std::to_string(state->step) + ".ckpt",
                            model, state);
        }
    }
    if (!opts.checkpoint_dir.empty()) {
        std::filesystem::create_directories(opts.checkpoint_dir);
        save_checkpoint(opts.checkpoint_dir + "/final.ckpt", model, state);
    }
    return result;
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {
constexpr char kMagic[8] = {'F', 'U', 'S', 'E', 'N', 'E', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw IoError("malformed checkpoint (truncated): " + path);
    return v;
}
void put_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}
void get_doubles(std::istream& is, std::vector<double>& v,
                 const std::string& path) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw IoError("malformed checkpoint (truncated): " + path);
}
}  // namespace

void save_checkpoint(const std::string& path, const FusionModel& model,
                     const TrainState* train_state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os.write(kMagic, sizeof kMagic);
    std::string cfg = model.cfg.to_key_values();
    put<uint32_t>(os, static_cast<uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    const auto& ps = model.params.all();
    put<uint32_t>(os, static_cast<uint32_t>(ps.size()));
    for (const auto& p : ps) {
        put<uint16_t>(os, static_cast<uint16_t>(p.name().size()));
        os.write(p.name().data(),
                 static_cast<std::streamsize>(p.name().size()));
        put<uint8_t>(os, static_cast<uint8_t>(p.shape().size()));
        for (int e : p.shape()) put<uint32_t>(os, static_cast<uint32_t>(e));
        put_doubles(os, p.values());
    }

    put<uint8_t>(os, train_state ? 1 : 0);
    if (train_state) {
        if (train_state->opt.m.size() != ps.size())
            throw UsageError("checkpoint: optimizer state mismatch");
        for (size_t i = 0; i < ps.size(); ++i) {
            put_doubles(os, train_state->opt.m[i]);
            put_doubles(os, train_state->opt.v[i]);
        }
        put<int64_t>(os, train_state->opt.t);
        put<int64_t>(os, train_state->step);
        for (int i = 0; i < 4; ++i)
            put<uint64_t>(os, train_state->rng.state()[i]);
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw IoError("malformed checkpoint (bad magic): " + path);

    auto cfg_len = get<uint32_t>(is, path);
    std::string cfg_text(cfg_len, '\0');
    is.read(cfg_text.data(), cfg_len);
    if (!is) throw IoError("malformed checkpoint (truncated config): " + path);

    LoadedCheckpoint out{FusionModel::build(FusionConfig::from_key_values(cfg_text))};

    auto count = get<uint32_t>(is, path);
    if (count != out.model.params.all().size())
        throw IoError("malformed checkpoint: parameter count " +
                      std::to_string(count) + " does not match the config");
    for (uint32_t i = 0; i < count; ++i) {
        auto name_len = get<uint16_t>(is, path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        auto rank = get<uint8_t>(is, path);
        Shape shape(rank);
        for (int d = 0; d < rank; ++d)
            shape[d] = static_cast<int>(get<uint32_t>(is, path));
        Parameter* p = out.model.params.find(name);
        if (!p)
            throw IoError("malformed checkpoint: unknown parameter '" + name +
                          "'");
        if (p->shape() != shape)
            throw IoError("malformed checkpoint: parameter '" + name +
                          "' has shape " + shape_str(shape) + ", expected " +
                          shape_str(p->shape()));
        get_doubles(is, p->values(), path);
    }

    auto has_state = get<uint8_t>(is, path);
    if (has_state) {
        out.has_train_state = true;
        out.train_state.opt.init(out.model.params);
        for (size_t i = 0; i < out.model.params.all().size(); ++i) {
            get_doubles(is, out.train_state.opt.m[i], path);
            get_doubles(is, out.train_state.opt.v[i], path);
        }
        out.train_state.opt.t = get<int64_t>(is, path);
        out.train_state.step = get<int64_t>(is, path);
        uint64_t st[4];
        for (auto& wv : st) wv = get<uint64_t>(is, path);
        out.train_state.rng.set_state(st);
    }
    return out;
}

}  // namespace fusion
