#pragma once

#include <string>
#include <vector>

#include "fusion/mafe.hpp"
#include "fusion/mccm.hpp"
#include "fusion/objective.hpp"

namespace fusion {

struct FusionConfig {
    int width = 8;   // stem width C, even
    int state = 4;   // SSM state dim S
    int experts = 4;
    int top_k = 2;
    LossWeights weights;  // 0.8, 0.4, 1, 1, 1
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int lr_halve_every = 1000;
    int epochs = 10;
    uint64_t seed = 42;
    bool bidirectional = true;
    bool use_mafe = true;   // false: stems pass the image through by tiling
    int checkpoint_every = 0;  // steps; 0 = final only
    double ln_eps = 1e-5;
    int head_width = 0;  // 0 -> width

    void validate() const;
    std::string to_key_values() const;
    static FusionConfig from_key_values(const std::string& text);
    static FusionConfig from_file(const std::string& path);
};

// Two modality streams (independent weights), expert fusion, and a small
// reconstruction head (two 3x3 convs with SiLU, then 1x1 + sigmoid).
struct FusionModel {
    FusionConfig cfg;
    ParamRegistry params;
    MafeParams mafe1, mafe2;   // unused when cfg.use_mafe is false
    MccmParams mccm;
    Parameter head_w1, head_b1, head_w2, head_b2, head_w3, head_b3;

    static FusionModel build(const FusionConfig& cfg);
};

struct FuseResult {
    Tensor image;  // [1,H,W], in [0,1]
    Tensor f_m1, f_m2, f_mf;
    GateDecision gate;
    std::vector<Tensor> expert_outputs;
};

// Inputs must share an even HxW of at least 16 and lie in [0,1].
FuseResult fuse_forward(const Tensor& a, const Tensor& b,
                        const FusionModel& model, Rng* rng, bool train);

// Piecewise-cosine schedule: within each halving window the rate decays
// smoothly from the window's start value to half of it.
double lr_at(long long step, double lr0, int halve_every);

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long long t = 0;  // completed updates
    void init(const ParamRegistry& params);
};

// Standard Adam with bias correction at the given learning rate.
void adam_step(ParamRegistry& params, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct TrainRecord {
    long long step = 0;  // 1-based
    int epoch = 0;       // 1-based
    double lr = 0;
    LossBreakdown losses;
    std::vector<double> gate_weights;
    std::vector<int> selected;
    std::string to_json() const;
};

struct TrainResult {
    std::vector<TrainRecord> log;
    double initial_total = 0;
    double final_total = 0;
};

// Everything that evolves across steps; epoch and pair index derive from
// `step`, so resuming from a saved state continues bit-identically.
struct TrainState {
    AdamState opt;
    Rng rng{42};
    long long step = 0;
};

struct TrainOptions {
    std::string log_path;        // JSON-lines, one record per step
    std::string checkpoint_dir;  // checkpoints when configured
    long long max_steps = 0;     // 0 = epochs * pairs
};

TrainResult train(FusionModel& model,
                  const std::vector<std::pair<Tensor, Tensor>>& pairs,
                  const TrainOptions& opts = {}, TrainState* state = nullptr);

// Flat binary checkpoint container (versioned; see docs/checkpoint.md).
void save_checkpoint(const std::string& path, const FusionModel& model,
                     const TrainState* train_state = nullptr);

struct LoadedCheckpoint {
    FusionModel model;
    bool has_train_state = false;
    TrainState train_state;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace fusion
