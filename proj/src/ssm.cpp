#include "fusion/ssm.hpp"

#include <cmath>

#include "fusion/ops.hpp"

namespace fusion {

SsmParams make_ssm_params(ParamRegistry& reg, const std::string& prefix,
                          int dim, int state, Rng& rng) {
    SsmParams p;
    p.dim = dim;
    p.state = state;
    std::vector<double> alog(static_cast<size_t>(dim) * state);
    for (int d = 0; d < dim; ++d)
        for (int s = 0; s < state; ++s)
            alog[d * state + s] = std::log(static_cast<double>(s + 1));
    p.a_log = reg.create(prefix + ".a_log", {dim, state}, std::move(alog));
    p.w_delta = reg.create_uniform(prefix + ".w_delta", {dim}, rng, -0.05, 0.05);
    p.b_delta = reg.create_const(prefix + ".b_delta", {1}, 0.0);
    p.w_b = reg.create_uniform(prefix + ".w_b", {dim, state}, rng, -0.1, 0.1);
    p.b_b = reg.create_const(prefix + ".b_b", {state}, 0.0);
    p.w_c = reg.create_uniform(prefix + ".w_c", {dim, state}, rng, -0.1, 0.1);
    p.b_c = reg.create_const(prefix + ".b_c", {state}, 0.0);
    p.skip = reg.create_const(prefix + ".skip", {dim}, 1.0);
    return p;
}

namespace {
double softplus_v(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}
double sigmoid_v(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}
}  // namespace

Tensor selective_scan(const Tensor& tokens, const SsmParams& params,
                      const ScanOrder& order) {
    if (tokens.rank() != 2)
        throw ShapeError("selective_scan expects tokens [L,D], got " +
                         shape_str(tokens.shape()));
    const int L = tokens.shape()[0];
    const int D = tokens.shape()[1];
    const int S = params.state;
    if (D != params.dim)
        throw ShapeError("selective_scan: token dim " + std::to_string(D) +
                         " != params dim " + std::to_string(params.dim));
    if (order.length() != L)
        throw ShapeError("selective_scan: order length " +
                         std::to_string(order.length()) +
                         " != token count " + std::to_string(L));
    check_finite(tokens, "selective_scan tokens");

    int m1 = 0;
    for (int t : order.tags) m1 += t == 1 ? 1 : 0;
    std::vector<int> ord = order.storage_indices(m1);
    {
        std::vector<char> seen(L, 0);
        for (int t : ord) {
            if (t < 0 || t >= L || seen[t])
                throw ShapeError("selective_scan: order is not a permutation "
                                 "of token positions");
            seen[t] = 1;
        }
    }

    const double* xv = tokens.data().data();
    const double* alog = params.a_log.values().data();
    const double* wd = params.w_delta.values().data();
    const double bd = params.b_delta.values()[0];
    const double* wb = params.w_b.values().data();
    const double* bb = params.b_b.values().data();
    const double* wc = params.w_c.values().data();
    const double* bc = params.b_c.values().data();
    const double* sk = params.skip.values().data();

    std::vector<double> amat(static_cast<size_t>(D) * S);
    for (long long i = 0; i < static_cast<long long>(D) * S; ++i)
        amat[i] = -std::exp(alog[i]);

    // forward state and saved intermediates for the adjoint sweep
    std::vector<double> hs(static_cast<size_t>(L) * D * S);   // post-step state
    std::vector<double> as(static_cast<size_t>(L) * D * S);   // exp(delta*A)
    std::vector<double> deltas(L), zs(L);
    std::vector<double> bs(static_cast<size_t>(L) * S);
    std::vector<double> cs(static_cast<size_t>(L) * S);
    std::vector<double> out(static_cast<size_t>(L) * D, 0.0);

    std::vector<double> h(static_cast<size_t>(D) * S, 0.0);
    for (int p = 0; p < L; ++p) {
        const int t = ord[p];
        const double* x = xv + static_cast<long long>(t) * D;
        double z = bd;
        for (int d = 0; d < D; ++d) z += x[d] * wd[d];
        double delta = softplus_v(z);
        zs[p] = z;
        deltas[p] = delta;
        double* bp = bs.data() + static_cast<long long>(p) * S;
        double* cp = cs.data() + static_cast<long long>(p) * S;
        for (int s = 0; s < S; ++s) {
            bp[s] = bb[s];
            cp[s] = bc[s];
        }
        for (int d = 0; d < D; ++d) {
            double xd = x[d];
            if (xd == 0) continue;
            const double* wbr = wb + static_cast<long long>(d) * S;
            const double* wcr = wc + static_cast<long long>(d) * S;
            for (int s = 0; s < S; ++s) {
                bp[s] += xd * wbr[s];
                cp[s] += xd * wcr[s];
            }
        }
        double* hp = hs.data() + static_cast<long long>(p) * D * S;
        double* ap = as.data() + static_cast<long long>(p) * D * S;
        for (int d = 0; d < D; ++d) {
            double xd = x[d];
            double y = sk[d] * xd;
            double* hd = h.data() + static_cast<long long>(d) * S;
            const double* ad = amat.data() + static_cast<long long>(d) * S;
            for (int s = 0; s < S; ++s) {
                double a = std::exp(delta * ad[s]);
                double hn = a * hd[s] + delta * bp[s] * xd;
                hd[s] = hn;
                hp[d * S + s] = hn;
                ap[d * S + s] = a;
                y += cp[s] * hn;
            }
            out[static_cast<long long>(t) * D + d] = y;
        }
    }

    return make_op(
        {L, D}, std::move(out),
        {tokens, params.a_log.tensor(), params.w_delta.tensor(),
         params.b_delta.tensor(), params.w_b.tensor(), params.b_b.tensor(),
         params.w_c.tensor(), params.b_c.tensor(), params.skip.tensor()},
        [L, D, S, ord = std::move(ord), amat = std::move(amat),
         hs = std::move(hs), as = std::move(as), deltas = std::move(deltas),
         zs = std::move(zs), bs = std::move(bs),
         cs = std::move(cs)](Node& node) {
            Node* ptok = node.parents[0].get();
            Node* palog = node.parents[1].get();
            Node* pwd = node.parents[2].get();
            Node* pbd = node.parents[3].get();
            Node* pwb = node.parents[4].get();
            Node* pbb = node.parents[5].get();
            Node* pwc = node.parents[6].get();
            Node* pbc = node.parents[7].get();
            Node* pskip = node.parents[8].get();

            const double* gy = node.grad.data();
            const double* xv = ptok->value.data();
            const double* wd = pwd->value.data();
            const double* wb = pwb->value.data();
            const double* wc = pwc->value.data();
            const double* sk = pskip->value.data();

            double* gx = ptok->requires_grad ? ptok->grad_data() : nullptr;
            double* galog = palog->requires_grad ? palog->grad_data() : nullptr;
            double* gwd = pwd->requires_grad ? pwd->grad_data() : nullptr;
            double* gbd = pbd->requires_grad ? pbd->grad_data() : nullptr;
            double* gwb = pwb->requires_grad ? pwb->grad_data() : nullptr;
            double* gbb = pbb->requires_grad ? pbb->grad_data() : nullptr;
            double* gwc = pwc->requires_grad ? pwc->grad_data() : nullptr;
            double* gbc = pbc->requires_grad ? pbc->grad_data() : nullptr;
            double* gskip = pskip->requires_grad ? pskip->grad_data() : nullptr;

            std::vector<double> gh(static_cast<size_t>(D) * S, 0.0);
            std::vector<double> ga(static_cast<size_t>(D) * S, 0.0);
            std::vector<double> gbp(S), gcp(S);

            for (int p = L - 1; p >= 0; --p) {
                const int t = ord[p];
                const double* x = xv + static_cast<long long>(t) * D;
                const double* hp = hs.data() + static_cast<long long>(p) * D * S;
                const double* hprev =
                    p > 0 ? hs.data() + static_cast<long long>(p - 1) * D * S
                          : nullptr;
                const double* ap = as.data() + static_cast<long long>(p) * D * S;
                const double* bp = bs.data() + static_cast<long long>(p) * S;
                const double* cp = cs.data() + static_cast<long long>(p) * S;
                const double delta = deltas[p];

                std::fill(gbp.begin(), gbp.end(), 0.0);
                std::fill(gcp.begin(), gcp.end(), 0.0);
                double gdelta = 0.0;

                for (int d = 0; d < D; ++d) {
                    const double xd = x[d];
                    const double g = gy[static_cast<long long>(t) * D + d];
                    if (gskip) gskip[d] += g * xd;
                    double gxd = g * sk[d];
                    double* ghd = gh.data() + static_cast<long long>(d) * S;
                    const double* hd = hp + static_cast<long long>(d) * S;
                    const double* hpd =
                        hprev ? hprev + static_cast<long long>(d) * S : nullptr;
                    const double* ad = ap + static_cast<long long>(d) * S;
                    const double* am = amat.data() + static_cast<long long>(d) * S;
                    double* gad = ga.data() + static_cast<long long>(d) * S;
                    for (int s = 0; s < S; ++s) {
                        double ghv = ghd[s] + g * cp[s];
                        gcp[s] += g * hd[s];
                        double hprev_v = hpd ? hpd[s] : 0.0;
                        gdelta += ghv * (am[s] * ad[s] * hprev_v + bp[s] * xd);
                        gad[s] += ghv * delta * ad[s] * hprev_v;
                        gbp[s] += ghv * delta * xd;
                        gxd += ghv * delta * bp[s];
                        ghd[s] = ghv * ad[s];  // adjoint of previous state
                    }
                    if (gx) gx[static_cast<long long>(t) * D + d] += gxd;
                }

                // B/C affine projections
                for (int s = 0; s < S; ++s) {
                    if (gbb) gbb[s] += gbp[s];
                    if (gbc) gbc[s] += gcp[s];
                }
                for (int d = 0; d < D; ++d) {
                    const double xd = x[d];
                    double gxd = 0.0;
                    const double* wbr = wb + static_cast<long long>(d) * S;
                    const double* wcr = wc + static_cast<long long>(d) * S;
                    for (int s = 0; s < S; ++s) {
                        if (gwb) gwb[d * S + s] += xd * gbp[s];
                        if (gwc) gwc[d * S + s] += xd * gcp[s];
                        gxd += wbr[s] * gbp[s] + wcr[s] * gcp[s];
                    }
                    if (gx) gx[static_cast<long long>(t) * D + d] += gxd;
                }

                // delta = softplus(z), z affine in the token
                double gz = gdelta * sigmoid_v(zs[p]);
                if (gbd) gbd[0] += gz;
                for (int d = 0; d < D; ++d) {
                    if (gwd) gwd[d] += gz * x[d];
                    if (gx) gx[static_cast<long long>(t) * D + d] += gz * wd[d];
                }
            }

            if (galog)
                for (long long i = 0; i < static_cast<long long>(D) * S; ++i)
                    galog[i] += ga[i] * amat[i];  // dA/da_log = A
        });
}

Tensor bidirectional_scan(const Tensor& tokens, const SsmParams& fwd,
                          const SsmParams& bwd, const ScanOrder& order) {
    if (fwd.dim != bwd.dim || fwd.state != bwd.state)
        throw ShapeError("bidirectional_scan: parameter sets must share (D,S)");
    Tensor f = selective_scan(tokens, fwd, order);
    Tensor b = selective_scan(tokens, bwd, reverse(order));
    return scale(add(f, b), 0.5);
}

Tensor directional_scan(const Tensor& tokens, const SsmParams& fwd,
                        const SsmParams& bwd, const ScanOrder& order,
                        bool bidirectional) {
    if (bidirectional) return bidirectional_scan(tokens, fwd, bwd, order);
    return selective_scan(tokens, fwd, order);
}

}  // namespace fusion
