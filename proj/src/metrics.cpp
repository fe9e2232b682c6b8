#include "fusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fusion {

namespace {

// plain [H,W] buffer for metric arithmetic
struct Img {
    int h = 0, w = 0;
    std::vector<double> v;
    double at(int i, int j) const { return v[static_cast<size_t>(i) * w + j]; }
};

Img to_gray(const Tensor& t) {
    if (t.rank() != 3)
        throw ShapeError("metrics expect [C,H,W], got " + shape_str(t.shape()));
    Img img;
    int c = t.shape()[0];
    img.h = t.shape()[1];
    img.w = t.shape()[2];
    size_t hw = static_cast<size_t>(img.h) * img.w;
    img.v.assign(hw, 0.0);
    const auto& d = t.data();
    for (int ch = 0; ch < c; ++ch)
        for (size_t p = 0; p < hw; ++p) img.v[p] += d[ch * hw + p];
    for (auto& x : img.v) x /= c;
    return img;
}

void check_same(const Img& a, const Img& b, const char* who) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(who) + ": image sizes differ");
}

double entropy_term(double p) { return p > 0 ? -p * std::log(p) : 0.0; }

// MI between two quantized images from their joint histogram
double mi_pair(const Img& x, const Img& y, int bins) {
    std::vector<double> joint(static_cast<size_t>(bins) * bins, 0.0);
    std::vector<double> px(bins, 0.0), py(bins, 0.0);
    size_t n = x.v.size();
    auto q = [bins](double v) {
        int i = static_cast<int>(std::lround(v * (bins - 1)));
        return std::clamp(i, 0, bins - 1);
    };
    for (size_t i = 0; i < n; ++i) {
        int a = q(x.v[i]), b = q(y.v[i]);
        joint[static_cast<size_t>(a) * bins + b] += 1.0;
        px[a] += 1.0;
        py[b] += 1.0;
    }
    double inv = 1.0 / static_cast<double>(n);
    double mi = 0;
    for (int a = 0; a < bins; ++a) {
        if (px[a] == 0) continue;
        for (int b = 0; b < bins; ++b) {
            double pj = joint[static_cast<size_t>(a) * bins + b] * inv;
            if (pj > 0)
                mi += pj * std::log(pj / (px[a] * inv * py[b] * inv));
        }
    }
    return mi;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    size_t n = x.size();
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0) return 0.0;  // zero-variance convention
    if (sxy == sxx && sxy == syy) return 1.0;  // identical centered vectors
    return sxy / std::sqrt(sxx * syy);
}

Img downsample2(const Img& x) {
    Img o;
    o.h = x.h / 2;
    o.w = x.w / 2;
    o.v.resize(static_cast<size_t>(o.h) * o.w);
    for (int i = 0; i < o.h; ++i)
        for (int j = 0; j < o.w; ++j)
            o.v[static_cast<size_t>(i) * o.w + j] =
                0.25 * (x.at(2 * i, 2 * j) + x.at(2 * i, 2 * j + 1) +
                        x.at(2 * i + 1, 2 * j) + x.at(2 * i + 1, 2 * j + 1));
    return o;
}

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gauss11() {
    static const std::vector<double> w = [] {
        std::vector<double> v(kWin * kWin);
        double sum = 0, sigma = 1.5;
        for (int i = 0; i < kWin; ++i)
            for (int j = 0; j < kWin; ++j) {
                double di = i - (kWin - 1) / 2.0, dj = j - (kWin - 1) / 2.0;
                v[i * kWin + j] =
                    std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
                sum += v[i * kWin + j];
            }
        for (auto& x : v) x /= sum;
        return v;
    }();
    return w;
}

// mean luminance-contrast-structure terms over all valid windows
void ssim_terms(const Img& x, const Img& y, double* mean_l, double* mean_cs,
                double* mean_ssim) {
    const auto& w = gauss11();
    int oh = x.h - kWin + 1, ow = x.w - kWin + 1;
    double sl = 0, scs = 0, sss = 0;
    for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
            double mu1 = 0, mu2 = 0, xx = 0, yy = 0, xy = 0;
            for (int p = 0; p < kWin; ++p)
                for (int q = 0; q < kWin; ++q) {
                    double wv = w[p * kWin + q];
                    double xv = x.at(i + p, j + q), yv = y.at(i + p, j + q);
                    mu1 += wv * xv;
                    mu2 += wv * yv;
                    xx += wv * xv * xv;
                    yy += wv * yv * yv;
                    xy += wv * xv * yv;
                }
            double s1 = xx - mu1 * mu1, s2 = yy - mu2 * mu2;
            double s12 = xy - mu1 * mu2;
            double l = (2 * mu1 * mu2 + kC1) / (mu1 * mu1 + mu2 * mu2 + kC1);
            double cs = (2 * s12 + kC2) / (s1 + s2 + kC2);
            sl += l;
            scs += cs;
            sss += l * cs;
        }
    double n = static_cast<double>(oh) * ow;
    *mean_l = sl / n;
    *mean_cs = scs / n;
    *mean_ssim = sss / n;
}

const double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

double msssim_pair(Img x, Img y) {
    int scales = msssim_scale_count(x.h, x.w);
    double wsum = 0;
    for (int k = 0; k < scales; ++k) wsum += kMsWeights[k];
    double result = 1.0;
    for (int k = 0; k < scales; ++k) {
        double l, cs, ss;
        ssim_terms(x, y, &l, &cs, &ss);
        double term = k + 1 < scales ? cs : ss;
        term = std::max(term, 0.0);
        result *= std::pow(term, kMsWeights[k] / wsum);
        if (k + 1 < scales) {
            x = downsample2(x);
            y = downsample2(y);
        }
    }
    return result;
}

}  // namespace

int msssim_scale_count(int h, int w) {
    int scales = 0;
    int mh = h, mw = w;
    while (scales < 5 && mh >= kWin && mw >= kWin) {
        ++scales;
        mh /= 2;
        mw /= 2;
    }
    if (scales == 0)
        throw ShapeError("ms-ssim: image smaller than the 11x11 window");
    return scales;
}

double metric_mi(const Tensor& f, const Tensor& a, const Tensor& b, int bins) {
    Img fi = to_gray(f), ai = to_gray(a), bi = to_gray(b);
    check_same(fi, ai, "metric_mi");
    check_same(fi, bi, "metric_mi");
    return mi_pair(fi, ai, bins) + mi_pair(fi, bi, bins);
}

double metric_sf(const Tensor& f) {
    Img x = to_gray(f);
    double rf = 0, cf = 0;
    long long nr = 0, nc = 0;
    for (int i = 0; i < x.h; ++i)
        for (int j = 1; j < x.w; ++j) {
            double d = x.at(i, j) - x.at(i, j - 1);
            rf += d * d;
            ++nr;
        }
    for (int i = 1; i < x.h; ++i)
        for (int j = 0; j < x.w; ++j) {
            double d = x.at(i, j) - x.at(i - 1, j);
            cf += d * d;
            ++nc;
        }
    rf = nr ? rf / nr : 0;
    cf = nc ? cf / nc : 0;
    return std::sqrt(rf + cf);
}

double metric_ag(const Tensor& f) {
    Img x = to_gray(f);
    double s = 0;
    long long n = 0;
    for (int i = 0; i + 1 < x.h; ++i)
        for (int j = 0; j + 1 < x.w; ++j) {
            double dx = x.at(i, j + 1) - x.at(i, j);
            double dy = x.at(i + 1, j) - x.at(i, j);
            s += std::sqrt((dx * dx + dy * dy) / 2.0);
            ++n;
        }
    return n ? s / n : 0;
}

double metric_cc(const Tensor& f, const Tensor& a, const Tensor& b) {
    Img fi = to_gray(f), ai = to_gray(a), bi = to_gray(b);
    check_same(fi, ai, "metric_cc");
    check_same(fi, bi, "metric_cc");
    return 0.5 * (pearson(fi.v, ai.v) + pearson(fi.v, bi.v));
}

double metric_scd(const Tensor& f, const Tensor& a, const Tensor& b) {
    Img fi = to_gray(f), ai = to_gray(a), bi = to_gray(b);
    check_same(fi, ai, "metric_scd");
    check_same(fi, bi, "metric_scd");
    size_t n = fi.v.size();
    std::vector<double> fmb(n), fma(n);
    for (size_t i = 0; i < n; ++i) {
        fmb[i] = fi.v[i] - bi.v[i];
        fma[i] = fi.v[i] - ai.v[i];
    }
    return pearson(fmb, ai.v) + pearson(fma, bi.v);
}

double metric_msssim(const Tensor& f, const Tensor& a, const Tensor& b) {
    Img fi = to_gray(f), ai = to_gray(a), bi = to_gray(b);
    check_same(fi, ai, "metric_msssim");
    check_same(fi, bi, "metric_msssim");
    return 0.5 * (msssim_pair(fi, ai) + msssim_pair(fi, bi));
}

MetricReport evaluate_metrics(const Tensor& f, const Tensor& a,
                              const Tensor& b) {
    MetricReport r;
    r.mi = metric_mi(f, a, b);
    r.sf = metric_sf(f);
    r.ag = metric_ag(f);
    r.cc = metric_cc(f, a, b);
    r.scd = metric_scd(f, a, b);
    r.ms_ssim = metric_msssim(f, a, b);
    return r;
}

std::string MetricReport::to_json() const {
    std::ostringstream os;
    os.precision(12);
    os << "{\"mi\":" << mi << ",\"sf\":" << sf << ",\"ag\":" << ag
       << ",\"cc\":" << cc << ",\"scd\":" << scd << ",\"ms_ssim\":" << ms_ssim
       << "}";
    return os.str();
}

}  // namespace fusion
