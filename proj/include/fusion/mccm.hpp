#pragma once

#include <vector>

#include "fusion/ssm.hpp"

namespace fusion {

struct MccmConfig {
    int feat_width = 16;  // C', width of each modality feature
    int experts = 4;
    int top_k = 2;
    int state = 4;
    bool bidirectional = true;
    double ln_eps = 1e-5;

    void validate() const;
};

// One cross-modal expert. Each modality stream has its own norm and
// projections; the cross-modal scan parameters are shared by both
// argument orders. Output width is 2C'.
struct ExpertParams {
    Parameter ln_g1, ln_b1, lin_w1, lin_b1, pw_w1, pw_b1;
    Parameter ln_g2, ln_b2, lin_w2, lin_b2, pw_w2, pw_b2;
    SsmParams cm_fwd, cm_bwd;  // D = 2C'
};

struct GateParams {
    Parameter w_g;      // [2C', N]
    Parameter w_noise;  // [2C', N]
};

struct MccmParams {
    MccmConfig cfg;
    std::vector<ExpertParams> experts;
    GateParams gate;
};

MccmParams make_mccm_params(ParamRegistry& reg, const std::string& prefix,
                            const MccmConfig& cfg, Rng& rng);

// Gate decision over pooled features. weights lie on the simplex with
// exactly top_k nonzeros; raw logits and realized noise are retained.
struct GateDecision {
    std::vector<double> weights;  // dense, length N
    std::vector<int> selected;    // top_k indices, best first
    std::vector<double> logits;   // noise-free logits
    std::vector<double> noise;    // realized perturbation (zero at inference)
    Tensor weights_t;             // [N] graph tensor with structural zeros
};

// f_mc = Cat(F_m1, F_m2) over channels. In train mode the rng drives
// Gaussian noise scaled by softplus(F_g . W_noise); at inference the
// noise is zero. Ties in the top-k break toward lower expert index.
GateDecision gate_decide(const Tensor& f_mc, const MccmParams& p, Rng* rng,
                         bool train);

// Intermediates exposed for tests and inspection.
struct CmExpertTrace {
    Tensor fln1, fln2;  // linear projections of the normalized inputs
    Tensor cm1, cm2;    // per-modality cross-scan outputs
};

Tensor cm_expert(const Tensor& f1, const Tensor& f2, const ExpertParams& e,
                 const MccmConfig& cfg, CmExpertTrace* trace = nullptr);

struct MccmResult {
    Tensor fused;                       // weighted sum over selected experts
    GateDecision gate;
    std::vector<Tensor> expert_outputs; // all N in train mode; selected only
                                        // at inference (others undefined)
};

MccmResult mccm_forward(const Tensor& f1, const Tensor& f2,
                        const MccmParams& p, Rng* rng, bool train);

// Squared coefficient of variation over all N weights.
Tensor loss_wb(const Tensor& weights);

// Mean cosine similarity over ordered expert pairs; cosine with a zero
// vector counts as 0.
Tensor loss_div(const std::vector<Tensor>& outs);

// Gate-weighted squared deviation (element mean) from the consensus.
Tensor loss_cons(const std::vector<Tensor>& outs, const GateDecision& gate);

// cos(t/T * pi/2) with exact endpoints; t > T clamps to T with a warning.
double lambda_schedule(int t, int total_epochs);

struct MccmLossParts {
    Tensor total, wb, div, cons;
    double lambda = 0;
};
MccmLossParts loss_mccm(const GateDecision& gate,
                        const std::vector<Tensor>& outs, int t,
                        int total_epochs);

}  // namespace fusion
