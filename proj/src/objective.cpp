#include "fusion/objective.hpp"

#include <cmath>

namespace fusion {

namespace {
constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWindow * kWindow);
        double sum = 0;
        for (int i = 0; i < kWindow; ++i)
            for (int j = 0; j < kWindow; ++j) {
                double di = i - (kWindow - 1) / 2.0;
                double dj = j - (kWindow - 1) / 2.0;
                v[i * kWindow + j] =
                    std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
                sum += v[i * kWindow + j];
            }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return w;
}

Tensor luminance(const Tensor& img) {
    if (img.rank() != 3)
        throw ShapeError("ssim expects [C,H,W], got " + shape_str(img.shape()));
    return img.shape()[0] == 1 ? img : mean_channels(img);
}
}  // namespace

Tensor ssim(const Tensor& xin, const Tensor& yin) {
    Tensor x = luminance(xin), y = luminance(yin);
    if (x.shape() != y.shape())
        throw ShapeError("ssim: shapes differ: " + shape_str(xin.shape()) +
                         " vs " + shape_str(yin.shape()));
    int h = x.shape()[1], w = x.shape()[2];
    if (h < kWindow || w < kWindow)
        throw ShapeError("ssim: image " + std::to_string(h) + "x" +
                         std::to_string(w) + " smaller than the 11x11 window");
    const auto& win = gaussian_window();
    auto filt = [&](const Tensor& t) {
        return window_filter_valid(t, win, kWindow, kWindow);
    };
    Tensor mu1 = filt(x), mu2 = filt(y);
    Tensor s1 = sub(filt(mul(x, x)), mul(mu1, mu1));
    Tensor s2 = sub(filt(mul(y, y)), mul(mu2, mu2));
    Tensor s12 = sub(filt(mul(x, y)), mul(mu1, mu2));
    Tensor num = mul(add_const(scale(mul(mu1, mu2), 2.0), kC1),
                     add_const(scale(s12, 2.0), kC2));
    Tensor den = mul(add_const(add(mul(mu1, mu1), mul(mu2, mu2)), kC1),
                     add_const(add(s1, s2), kC2));
    return mean_all(div(num, den));
}

Tensor loss_ssim(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2) {
    Tensor a = scale(add_const(neg(ssim(i_mf, i_m1)), 1.0), 0.5);
    Tensor b = scale(add_const(neg(ssim(i_mf, i_m2)), 1.0), 0.5);
    return add(a, b);
}

Tensor loss_int(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2) {
    if (i_mf.shape() != i_m1.shape() || i_m1.shape() != i_m2.shape())
        throw ShapeError("loss_int: image shapes differ");
    return mean_all(abs_t(sub(i_mf, emax(i_m1, i_m2))));
}

Tensor loss_total(const Tensor& f_mf, const Tensor& f_m1, const Tensor& f_m2,
                  const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2,
                  const GateDecision& gate,
                  const std::vector<Tensor>& expert_outs,
                  const LossWeights& w, int t, int total_epochs,
                  LossBreakdown* breakdown) {
    Tensor fcl = loss_fcl(f_mf, f_m1, f_m2);
    Tensor pcl = loss_pcl(i_mf, i_m1, i_m2);
    MccmLossParts mccm = loss_mccm(gate, expert_outs, t, total_epochs);
    Tensor lssim = loss_ssim(i_mf, i_m1, i_m2);
    Tensor lint = loss_int(i_mf, i_m1, i_m2);

    Tensor total = scale(fcl, w.fcl);
    total = add(total, scale(pcl, w.pcl));
    total = add(total, scale(mccm.total, w.mccm));
    total = add(total, scale(lssim, w.ssim));
    total = add(total, scale(lint, w.intensity));

    if (breakdown) {
        breakdown->fcl = fcl.item();
        breakdown->pcl = pcl.item();
        breakdown->mccm = mccm.total.item();
        breakdown->wb = mccm.wb.item();
        breakdown->divr = mccm.div.item();
        breakdown->cons = mccm.cons.item();
        breakdown->ssim = lssim.item();
        breakdown->intensity = lint.item();
        breakdown->lambda = mccm.lambda;
        breakdown->total = total.item();
    }
    return total;
}

}  // namespace fusion
