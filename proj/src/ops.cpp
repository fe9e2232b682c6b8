#include "fusion/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace fusion {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

// One side may be a scalar [1]; returns the broadcast output shape.
const Shape& binary_shape(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return a.shape();
    if (a.numel() == 1) return b.shape();
    if (b.numel() == 1) return a.shape();
    throw ShapeError("elementwise op shape mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

template <typename F, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
    const Shape& os = binary_shape(a, b);
    long long n = shape_numel(os);
    bool abc = a.numel() == 1 && n > 1;  // a broadcast
    bool bbc = b.numel() == 1 && n > 1;
    std::vector<double> out(n);
    const double* av = a.data().data();
    const double* bv = b.data().data();
    for (long long i = 0; i < n; ++i)
        out[i] = f(av[abc ? 0 : i], bv[bbc ? 0 : i]);
    return make_op(os, std::move(out), {a, b},
                   [abc, bbc, n, dfa, dfb](Node& node) {
                       Node* pa = node.parents[0].get();
                       Node* pb = node.parents[1].get();
                       const double* g = node.grad.data();
                       const double* av = pa->value.data();
                       const double* bv = pb->value.data();
                       double* ga = pa->requires_grad ? pa->grad_data() : nullptr;
                       double* gb = pb->requires_grad ? pb->grad_data() : nullptr;
                       for (long long i = 0; i < n; ++i) {
                           double x = av[abc ? 0 : i], y = bv[bbc ? 0 : i];
                           if (ga) ga[abc ? 0 : i] += dfa(x, y) * g[i];
                           if (gb) gb[bbc ? 0 : i] += dfb(x, y) * g[i];
                       }
                   });
}

template <typename F, typename DF>
Tensor unary_op(const Tensor& x, F f, DF df) {
    long long n = x.numel();
    std::vector<double> out(n);
    const double* xv = x.data().data();
    for (long long i = 0; i < n; ++i) out[i] = f(xv[i]);
    return make_op(x.shape(), std::move(out), {x}, [n, df](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        const double* xv = p->value.data();
        const double* og = node.grad.data();
        for (long long i = 0; i < n; ++i) g[i] += df(xv[i]) * og[i];
    });
}

double sigmoid_v(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_v(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu_v(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_d(double x) {
    double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor emax(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return x >= y ? x : y; },
        [](double x, double y) { return x >= y ? 1.0 : 0.0; },
        [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor neg(const Tensor& x) {
    return unary_op(x, [](double v) { return -v; }, [](double) { return -1.0; });
}

Tensor scale(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return c * v; },
                    [c](double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v + c; },
                    [](double) { return 1.0; });
}

Tensor abs_t(const Tensor& x) {
    return unary_op(x, [](double v) { return std::fabs(v); },
                    [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor sqrt_t(const Tensor& x) {
    for (double v : x.data())
        if (v < 0) throw NumericError("sqrt of negative value");
    return unary_op(x, [](double v) { return std::sqrt(v); },
                    [](double v) {
                        return v > 0 ? 0.5 / std::sqrt(v) : 0.0;
                    });
}

Tensor cos_t(const Tensor& x) {
    return unary_op(x, [](double v) { return std::cos(v); },
                    [](double v) { return -std::sin(v); });
}

Tensor sin_t(const Tensor& x) {
    return unary_op(x, [](double v) { return std::sin(v); },
                    [](double v) { return std::cos(v); });
}

Tensor hypot_t(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, [](double x, double y) { return std::hypot(x, y); },
        [](double x, double y) {
            double r = std::hypot(x, y);
            return r > 0 ? x / r : 0.0;
        },
        [](double x, double y) {
            double r = std::hypot(x, y);
            return r > 0 ? y / r : 0.0;
        });
}

Tensor atan2_t(const Tensor& y, const Tensor& x) {
    return binary_op(
        y, x, [](double yv, double xv) { return std::atan2(yv, xv); },
        [](double yv, double xv) {
            double r2 = xv * xv + yv * yv;
            return r2 > 0 ? xv / r2 : 0.0;
        },
        [](double yv, double xv) {
            double r2 = xv * xv + yv * yv;
            return r2 > 0 ? -yv / r2 : 0.0;
        });
}

Tensor gelu(const Tensor& x) { return unary_op(x, gelu_v, gelu_d); }

Tensor silu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v * sigmoid_v(v); },
        [](double v) {
            double s = sigmoid_v(v);
            return s + v * s * (1.0 - s);
        });
}

Tensor softplus_t(const Tensor& x) {
    return unary_op(x, softplus_v, sigmoid_v);
}

Tensor sigmoid_t(const Tensor& x) {
    return unary_op(x, sigmoid_v, [](double v) {
        double s = sigmoid_v(v);
        return s * (1.0 - s);
    });
}

Tensor softmax_lastaxis(const Tensor& x) {
    require(x.rank() >= 1, "softmax requires rank >= 1");
    int k = x.shape().back();
    long long rows = x.numel() / k;
    std::vector<double> out(x.numel());
    const double* xv = x.data().data();
    for (long long r = 0; r < rows; ++r) {
        const double* row = xv + r * k;
        double mx = row[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, row[i]);
        double s = 0;
        for (int i = 0; i < k; ++i) {
            out[r * k + i] = std::exp(row[i] - mx);
            s += out[r * k + i];
        }
        for (int i = 0; i < k; ++i) out[r * k + i] /= s;
    }
    std::vector<double> saved = out;
    return make_op(x.shape(), std::move(out), {x},
                   [k, rows, saved = std::move(saved)](Node& node) {
                       Node* p = node.parents[0].get();
                       if (!p->requires_grad) return;
                       double* g = p->grad_data();
                       const double* og = node.grad.data();
                       for (long long r = 0; r < rows; ++r) {
                           const double* y = saved.data() + r * k;
                           const double* gy = og + r * k;
                           double dot = 0;
                           for (int i = 0; i < k; ++i) dot += gy[i] * y[i];
                           for (int i = 0; i < k; ++i)
                               g[r * k + i] += y[i] * (gy[i] - dot);
                       }
                   });
}

Tensor sum_all(const Tensor& x) {
    double s = 0;
    for (double v : x.data()) s += v;
    long long n = x.numel();
    return make_op({1}, {s}, {x}, [n](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        double og = node.grad[0];
        for (long long i = 0; i < n; ++i) g[i] += og;
    });
}

Tensor mean_all(const Tensor& x) {
    double s = 0;
    for (double v : x.data()) s += v;
    long long n = x.numel();
    return make_op({1}, {s / n}, {x}, [n](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        double og = node.grad[0] / n;
        for (long long i = 0; i < n; ++i) g[i] += og;
    });
}

namespace {
// outer x extent x inner decomposition around one axis
struct AxisView {
    long long outer, inner;
    int extent;
};
AxisView axis_view(const Shape& s, int axis) {
    AxisView v{1, 1, s[axis]};
    for (int i = 0; i < axis; ++i) v.outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
    return v;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    require(!xs.empty(), "concat of zero tensors");
    const Shape& s0 = xs[0].shape();
    require(axis >= 0 && axis < static_cast<int>(s0.size()),
            "concat axis out of range");
    int total = 0;
    for (const auto& x : xs) {
        require(x.rank() == static_cast<int>(s0.size()),
                "concat rank mismatch");
        for (int d = 0; d < x.rank(); ++d)
            if (d != axis)
                require(x.shape()[d] == s0[d],
                        "concat shape mismatch: " + shape_str(x.shape()) +
                            " vs " + shape_str(s0));
        total += x.shape()[axis];
    }
    Shape os = s0;
    os[axis] = total;
    AxisView ov = axis_view(os, axis);
    std::vector<double> out(shape_numel(os));
    std::vector<int> extents;
    long long off = 0;
    for (const auto& x : xs) {
        int e = x.shape()[axis];
        extents.push_back(e);
        const double* xv = x.data().data();
        for (long long o = 0; o < ov.outer; ++o)
            std::memcpy(out.data() + (o * ov.extent + off) * ov.inner,
                        xv + o * e * ov.inner,
                        sizeof(double) * e * ov.inner);
        off += e;
    }
    std::vector<Tensor> parents(xs.begin(), xs.end());
    return make_op(os, std::move(out), std::move(parents),
                   [ov, extents](Node& node) {
                       long long off = 0;
                       for (size_t pi = 0; pi < node.parents.size(); ++pi) {
                           Node* p = node.parents[pi].get();
                           int e = extents[pi];
                           if (p->requires_grad) {
                               double* g = p->grad_data();
                               const double* og = node.grad.data();
                               for (long long o = 0; o < ov.outer; ++o) {
                                   const double* src =
                                       og + (o * ov.extent + off) * ov.inner;
                                   double* dst = g + o * e * ov.inner;
                                   for (long long i = 0; i < e * ov.inner; ++i)
                                       dst[i] += src[i];
                               }
                           }
                           off += e;
                       }
                   });
}

Tensor slice(const Tensor& x, int axis, int start, int len) {
    const Shape& s = x.shape();
    require(axis >= 0 && axis < x.rank(), "slice axis out of range");
    require(start >= 0 && len >= 1 && start + len <= s[axis],
            "slice range [" + std::to_string(start) + "," +
                std::to_string(start + len) + ") out of extent " +
                std::to_string(s[axis]));
    Shape os = s;
    os[axis] = len;
    AxisView v = axis_view(s, axis);
    std::vector<double> out(shape_numel(os));
    const double* xv = x.data().data();
    for (long long o = 0; o < v.outer; ++o)
        std::memcpy(out.data() + o * len * v.inner,
                    xv + (o * v.extent + start) * v.inner,
                    sizeof(double) * len * v.inner);
    return make_op(os, std::move(out), {x}, [v, start, len](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        const double* og = node.grad.data();
        for (long long o = 0; o < v.outer; ++o) {
            double* dst = g + (o * v.extent + start) * v.inner;
            const double* src = og + o * len * v.inner;
            for (long long i = 0; i < len * v.inner; ++i) dst[i] += src[i];
        }
    });
}

Tensor gather_map(const Tensor& x, Shape out_shape, std::vector<int> map) {
    long long n = shape_numel(out_shape);
    require(static_cast<long long>(map.size()) == n,
            "gather_map size mismatch");
    std::vector<double> out(n);
    const double* xv = x.data().data();
    long long xn = x.numel();
    for (long long i = 0; i < n; ++i) {
        require(map[i] >= 0 && map[i] < xn, "gather_map index out of range");
        out[i] = xv[map[i]];
    }
    return make_op(std::move(out_shape), std::move(out), {x},
                   [n, map = std::move(map)](Node& node) {
                       Node* p = node.parents[0].get();
                       if (!p->requires_grad) return;
                       double* g = p->grad_data();
                       const double* og = node.grad.data();
                       for (long long i = 0; i < n; ++i) g[map[i]] += og[i];
                   });
}

Tensor gather_idx(const Tensor& x, const std::vector<int>& idx) {
    require(x.rank() == 1, "gather_idx expects rank-1");
    return gather_map(x, {static_cast<int>(idx.size())},
                      std::vector<int>(idx.begin(), idx.end()));
}

Tensor scatter_idx(const Tensor& x, const std::vector<int>& idx, int n) {
    require(x.rank() == 1 &&
                x.numel() == static_cast<long long>(idx.size()),
            "scatter_idx input/index mismatch");
    std::vector<double> out(n, 0.0);
    for (size_t j = 0; j < idx.size(); ++j) {
        require(idx[j] >= 0 && idx[j] < n, "scatter_idx index out of range");
        out[idx[j]] = x.at(j);
    }
    return make_op({n}, std::move(out), {x}, [idx](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        const double* og = node.grad.data();
        for (size_t j = 0; j < idx.size(); ++j) g[j] += og[idx[j]];
    });
}

Tensor chw_to_tokens(const Tensor& x) {
    require(x.rank() == 3, "chw_to_tokens expects [C,H,W], got " +
                               shape_str(x.shape()));
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    int hw = h * w;
    std::vector<int> map(static_cast<size_t>(hw) * c);
    for (int p = 0; p < hw; ++p)
        for (int ch = 0; ch < c; ++ch) map[p * c + ch] = ch * hw + p;
    return gather_map(x, {hw, c}, std::move(map));
}

Tensor tokens_to_chw(const Tensor& x, int c, int h, int w) {
    require(x.rank() == 2 && x.shape()[0] == h * w && x.shape()[1] == c,
            "tokens_to_chw expects [" + std::to_string(h * w) + "," +
                std::to_string(c) + "], got " + shape_str(x.shape()));
    int hw = h * w;
    std::vector<int> map(static_cast<size_t>(c) * hw);
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) map[ch * hw + p] = p * c + ch;
    return gather_map(x, {c, h, w}, std::move(map));
}

Tensor broadcast_channels(const Tensor& v, int h, int w) {
    require(v.rank() == 1, "broadcast_channels expects [C]");
    int c = v.shape()[0];
    std::vector<int> map(static_cast<size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < h * w; ++p) map[ch * h * w + p] = ch;
    return gather_map(v, {c, h, w}, std::move(map));
}

Tensor mean_spatial(const Tensor& x) {
    require(x.rank() == 3, "mean_spatial expects [C,H,W]");
    int c = x.shape()[0];
    long long hw = static_cast<long long>(x.shape()[1]) * x.shape()[2];
    std::vector<double> out(c, 0.0);
    const double* xv = x.data().data();
    for (int ch = 0; ch < c; ++ch) {
        double s = 0;
        for (long long p = 0; p < hw; ++p) s += xv[ch * hw + p];
        out[ch] = s / hw;
    }
    return make_op({c}, std::move(out), {x}, [c, hw](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        for (int ch = 0; ch < c; ++ch) {
            double og = node.grad[ch] / hw;
            for (long long i = 0; i < hw; ++i) g[ch * hw + i] += og;
        }
    });
}

Tensor max_spatial(const Tensor& x) {
    require(x.rank() == 3, "max_spatial expects [C,H,W]");
    int c = x.shape()[0];
    long long hw = static_cast<long long>(x.shape()[1]) * x.shape()[2];
    std::vector<double> out(c);
    std::vector<long long> arg(c);
    const double* xv = x.data().data();
    for (int ch = 0; ch < c; ++ch) {
        long long best = 0;
        for (long long p = 1; p < hw; ++p)
            if (xv[ch * hw + p] > xv[ch * hw + best]) best = p;
        out[ch] = xv[ch * hw + best];
        arg[ch] = best;
    }
    return make_op({c}, std::move(out), {x},
                   [c, hw, arg = std::move(arg)](Node& node) {
                       Node* p = node.parents[0].get();
                       if (!p->requires_grad) return;
                       double* g = p->grad_data();
                       for (int ch = 0; ch < c; ++ch)
                           g[ch * hw + arg[ch]] += node.grad[ch];
                   });
}

Tensor mean_channels(const Tensor& x) {
    require(x.rank() == 3, "mean_channels expects [C,H,W]");
    int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    long long hw = static_cast<long long>(h) * w;
    std::vector<double> out(hw, 0.0);
    const double* xv = x.data().data();
    for (int ch = 0; ch < c; ++ch)
        for (long long p = 0; p < hw; ++p) out[p] += xv[ch * hw + p];
    for (long long p = 0; p < hw; ++p) out[p] /= c;
    return make_op({1, h, w}, std::move(out), {x}, [c, hw](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        for (int ch = 0; ch < c; ++ch)
            for (long long i = 0; i < hw; ++i)
                g[ch * hw + i] += node.grad[i] / c;
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require(w.rank() == 2, "linear weight must be [D,K], got " +
                               shape_str(w.shape()));
    int d = w.shape()[0], k = w.shape()[1];
    bool vec = x.rank() == 1;
    require(vec ? x.shape()[0] == d : (x.rank() == 2 && x.shape()[1] == d),
            "linear input " + shape_str(x.shape()) + " incompatible with " +
                shape_str(w.shape()));
    if (b.defined())
        require(b.rank() == 1 && b.shape()[0] == k,
                "linear bias must be [K], got " + shape_str(b.shape()));
    long long rows = vec ? 1 : x.shape()[0];
    std::vector<double> out(rows * k, 0.0);
    const double* xv = x.data().data();
    const double* wv = w.data().data();
    for (long long r = 0; r < rows; ++r)
        for (int dd = 0; dd < d; ++dd) {
            double xr = xv[r * d + dd];
            if (xr == 0) continue;
            const double* wr = wv + dd * k;
            double* or_ = out.data() + r * k;
            for (int kk = 0; kk < k; ++kk) or_[kk] += xr * wr[kk];
        }
    if (b.defined()) {
        const double* bv = b.data().data();
        for (long long r = 0; r < rows; ++r)
            for (int kk = 0; kk < k; ++kk) out[r * k + kk] += bv[kk];
    }
    Shape os = vec ? Shape{k} : Shape{static_cast<int>(rows), k};
    std::vector<Tensor> parents{x, w};
    if (b.defined()) parents.push_back(b);
    return make_op(os, std::move(out), std::move(parents),
                   [rows, d, k](Node& node) {
                       Node* px = node.parents[0].get();
                       Node* pw = node.parents[1].get();
                       const double* og = node.grad.data();
                       const double* xv = px->value.data();
                       const double* wv = pw->value.data();
                       if (px->requires_grad) {
                           double* gx = px->grad_data();
                           for (long long r = 0; r < rows; ++r)
                               for (int dd = 0; dd < d; ++dd) {
                                   double s = 0;
                                   const double* wr = wv + dd * k;
                                   const double* gr = og + r * k;
                                   for (int kk = 0; kk < k; ++kk)
                                       s += wr[kk] * gr[kk];
                                   gx[r * d + dd] += s;
                               }
                       }
                       if (pw->requires_grad) {
                           double* gw = pw->grad_data();
                           for (long long r = 0; r < rows; ++r)
                               for (int dd = 0; dd < d; ++dd) {
                                   double xr = xv[r * d + dd];
                                   if (xr == 0) continue;
                                   const double* gr = og + r * k;
                                   double* gwr = gw + dd * k;
                                   for (int kk = 0; kk < k; ++kk)
                                       gwr[kk] += xr * gr[kk];
                               }
                       }
                       if (node.parents.size() > 2 &&
                           node.parents[2]->requires_grad) {
                           double* gb = node.parents[2]->grad_data();
                           for (long long r = 0; r < rows; ++r)
                               for (int kk = 0; kk < k; ++kk)
                                   gb[kk] += og[r * k + kk];
                       }
                   });
}

namespace {
std::string kind_name(ConvKind k) {
    switch (k) {
        case ConvKind::Full3x3: return "full-3x3";
        case ConvKind::Depthwise3x3: return "depthwise-3x3";
        default: return "pointwise-1x1";
    }
}
}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, ConvKind kind,
              const Tensor& bias) {
    require(x.rank() == 3, "conv2d input must be [C,H,W], got " +
                               shape_str(x.shape()));
    int cin = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    int cout;
    const Shape& ws = w.shape();
    auto bad_kernel = [&]() {
        throw ShapeError("conv2d " + kind_name(kind) + ": kernel " +
                         shape_str(ws) + " incompatible with input " +
                         shape_str(x.shape()));
    };
    switch (kind) {
        case ConvKind::Full3x3:
            if (ws.size() != 4 || ws[1] != cin || ws[2] != 3 || ws[3] != 3)
                bad_kernel();
            cout = ws[0];
            break;
        case ConvKind::Depthwise3x3:
            if (ws.size() != 3 || ws[0] != cin || ws[1] != 3 || ws[2] != 3)
                bad_kernel();
            cout = cin;
            break;
        default:  // Pointwise1x1
            if (ws.size() != 2 || ws[1] != cin) bad_kernel();
            cout = ws[0];
            break;
    }
    if (bias.defined())
        require(bias.rank() == 1 && bias.shape()[0] == cout,
                "conv2d bias must be [" + std::to_string(cout) + "], got " +
                    shape_str(bias.shape()));

    long long hw = static_cast<long long>(h) * wd;
    std::vector<double> out(static_cast<long long>(cout) * hw, 0.0);
    const double* xv = x.data().data();
    const double* wv = w.data().data();

    if (kind == ConvKind::Pointwise1x1) {
        for (int o = 0; o < cout; ++o)
            for (int c = 0; c < cin; ++c) {
                double k = wv[o * cin + c];
                if (k == 0) continue;
                const double* src = xv + c * hw;
                double* dst = out.data() + o * hw;
                for (long long p = 0; p < hw; ++p) dst[p] += k * src[p];
            }
    } else {
        bool depthwise = kind == ConvKind::Depthwise3x3;
        for (int o = 0; o < cout; ++o) {
            int cfrom = depthwise ? o : 0;
            int cto = depthwise ? o + 1 : cin;
            for (int c = cfrom; c < cto; ++c) {
                const double* kw =
                    depthwise ? wv + o * 9 : wv + (o * cin + c) * 9;
                const double* src = xv + c * hw;
                double* dst = out.data() + o * hw;
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j < wd; ++j) {
                        double s = 0;
                        for (int p = 0; p < 3; ++p) {
                            int ii = i + p - 1;
                            if (ii < 0 || ii >= h) continue;
                            for (int q = 0; q < 3; ++q) {
                                int jj = j + q - 1;
                                if (jj < 0 || jj >= wd) continue;
                                s += kw[p * 3 + q] * src[ii * wd + jj];
                            }
                        }
                        dst[i * wd + j] += s;
                    }
            }
        }
    }
    if (bias.defined()) {
        const double* bv = bias.data().data();
        for (int o = 0; o < cout; ++o)
            for (long long p = 0; p < hw; ++p) out[o * hw + p] += bv[o];
    }

    std::vector<Tensor> parents{x, w};
    if (bias.defined()) parents.push_back(bias);
    return make_op(
        {cout, h, wd}, std::move(out), std::move(parents),
        [cin, cout, h, wd, hw, kind](Node& node) {
            Node* px = node.parents[0].get();
            Node* pw = node.parents[1].get();
            const double* og = node.grad.data();
            const double* xv = px->value.data();
            const double* wv = pw->value.data();
            double* gx = px->requires_grad ? px->grad_data() : nullptr;
            double* gw = pw->requires_grad ? pw->grad_data() : nullptr;
            if (kind == ConvKind::Pointwise1x1) {
                for (int o = 0; o < cout; ++o)
                    for (int c = 0; c < cin; ++c) {
                        const double* go = og + o * hw;
                        if (gx) {
                            double k = wv[o * cin + c];
                            double* dst = gx + c * hw;
                            for (long long p = 0; p < hw; ++p)
                                dst[p] += k * go[p];
                        }
                        if (gw) {
                            const double* src = xv + c * hw;
                            double s = 0;
                            for (long long p = 0; p < hw; ++p)
                                s += src[p] * go[p];
                            gw[o * cin + c] += s;
                        }
                    }
            } else {
                bool depthwise = kind == ConvKind::Depthwise3x3;
                for (int o = 0; o < cout; ++o) {
                    int cfrom = depthwise ? o : 0;
                    int cto = depthwise ? o + 1 : cin;
                    for (int c = cfrom; c < cto; ++c) {
                        long long kbase =
                            depthwise ? o * 9 : (static_cast<long long>(o) * cin + c) * 9;
                        const double* go = og + o * hw;
                        for (int i = 0; i < h; ++i)
                            for (int j = 0; j < wd; ++j) {
                                double g = go[i * wd + j];
                                if (g == 0) continue;
                                for (int p = 0; p < 3; ++p) {
                                    int ii = i + p - 1;
                                    if (ii < 0 || ii >= h) continue;
                                    for (int q = 0; q < 3; ++q) {
                                        int jj = j + q - 1;
                                        if (jj < 0 || jj >= wd) continue;
                                        if (gx)
                                            gx[c * hw + ii * wd + jj] +=
                                                wv[kbase + p * 3 + q] * g;
                                        if (gw)
                                            gw[kbase + p * 3 + q] +=
                                                xv[c * hw + ii * wd + jj] * g;
                                    }
                                }
                            }
                    }
                }
            }
            if (node.parents.size() > 2 && node.parents[2]->requires_grad) {
                double* gb = node.parents[2]->grad_data();
                for (int o = 0; o < cout; ++o) {
                    double s = 0;
                    for (long long p = 0; p < hw; ++p) s += og[o * hw + p];
                    gb[o] += s;
                }
            }
        });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps) {
    if (eps <= 0)
        throw ShapeError("layer_norm eps must be > 0");
    // groups: rank 3 -> across channels per (h,w); rank 2 -> across last
    // axis per row; rank 1 -> whole vector.
    int n;           // normalized extent
    long long groups;
    long long gstride, estride;  // flat index = g*gstride + e*estride
    if (x.rank() == 3) {
        n = x.shape()[0];
        groups = static_cast<long long>(x.shape()[1]) * x.shape()[2];
        gstride = 1;
        estride = groups;
    } else if (x.rank() == 2) {
        n = x.shape()[1];
        groups = x.shape()[0];
        gstride = n;
        estride = 1;
    } else if (x.rank() == 1) {
        n = x.shape()[0];
        groups = 1;
        gstride = 0;
        estride = 1;
    } else {
        throw ShapeError("layer_norm supports rank 1..3, got " +
                         shape_str(x.shape()));
    }
    require(gain.rank() == 1 && gain.shape()[0] == n,
            "layer_norm gain must be [" + std::to_string(n) + "], got " +
                shape_str(gain.shape()));
    require(offset.rank() == 1 && offset.shape()[0] == n,
            "layer_norm offset must be [" + std::to_string(n) + "], got " +
                shape_str(offset.shape()));

    const double* xv = x.data().data();
    const double* gv = gain.data().data();
    const double* bv = offset.data().data();
    std::vector<double> out(x.numel());
    std::vector<double> mus(groups), istds(groups);
    for (long long g = 0; g < groups; ++g) {
        double mu = 0;
        for (int e = 0; e < n; ++e) mu += xv[g * gstride + e * estride];
        mu /= n;
        double var = 0;
        for (int e = 0; e < n; ++e) {
            double d = xv[g * gstride + e * estride] - mu;
            var += d * d;
        }
        var /= n;
        double istd = 1.0 / std::sqrt(var + eps);
        mus[g] = mu;
        istds[g] = istd;
        for (int e = 0; e < n; ++e) {
            long long idx = g * gstride + e * estride;
            out[idx] = gv[e] * (xv[idx] - mu) * istd + bv[e];
        }
    }
    return make_op(
        x.shape(), std::move(out), {x, gain, offset},
        [n, groups, gstride, estride, mus = std::move(mus),
         istds = std::move(istds)](Node& node) {
            Node* px = node.parents[0].get();
            Node* pg = node.parents[1].get();
            Node* pb = node.parents[2].get();
            const double* og = node.grad.data();
            const double* xv = px->value.data();
            const double* gv = pg->value.data();
            double* gx = px->requires_grad ? px->grad_data() : nullptr;
            double* gg = pg->requires_grad ? pg->grad_data() : nullptr;
            double* gb = pb->requires_grad ? pb->grad_data() : nullptr;
            for (long long g = 0; g < groups; ++g) {
                double mu = mus[g], istd = istds[g];
                double s1 = 0, s2 = 0;
                for (int e = 0; e < n; ++e) {
                    long long idx = g * gstride + e * estride;
                    double xhat = (xv[idx] - mu) * istd;
                    double gy = og[idx];
                    double gxh = gy * gv[e];
                    s1 += gxh;
                    s2 += gxh * xhat;
                    if (gg) gg[e] += gy * xhat;
                    if (gb) gb[e] += gy;
                }
                if (gx)
                    for (int e = 0; e < n; ++e) {
                        long long idx = g * gstride + e * estride;
                        double xhat = (xv[idx] - mu) * istd;
                        double gxh = og[idx] * gv[e];
                        gx[idx] += istd * (gxh - s1 / n - xhat * s2 / n);
                    }
            }
        });
}

Tensor window_filter_valid(const Tensor& x, const std::vector<double>& w,
                           int wh, int ww) {
    require(x.rank() == 3, "window_filter_valid expects [C,H,W]");
    int c = x.shape()[0], h = x.shape()[1], wd = x.shape()[2];
    require(h >= wh && wd >= ww,
            "window " + std::to_string(wh) + "x" + std::to_string(ww) +
                " does not fit input " + shape_str(x.shape()));
    int oh = h - wh + 1, ow = wd - ww + 1;
    std::vector<double> out(static_cast<long long>(c) * oh * ow);
    const double* xv = x.data().data();
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
                double s = 0;
                for (int p = 0; p < wh; ++p)
                    for (int q = 0; q < ww; ++q)
                        s += w[p * ww + q] *
                             xv[ch * h * wd + (i + p) * wd + (j + q)];
                out[ch * oh * ow + i * ow + j] = s;
            }
    return make_op({c, oh, ow}, std::move(out), {x},
                   [c, h, wd, oh, ow, wh, ww, w](Node& node) {
                       Node* p = node.parents[0].get();
                       if (!p->requires_grad) return;
                       double* g = p->grad_data();
                       const double* og = node.grad.data();
                       for (int ch = 0; ch < c; ++ch)
                           for (int i = 0; i < oh; ++i)
                               for (int j = 0; j < ow; ++j) {
                                   double gy = og[ch * oh * ow + i * ow + j];
                                   if (gy == 0) continue;
                                   for (int pp = 0; pp < wh; ++pp)
                                       for (int q = 0; q < ww; ++q)
                                           g[ch * h * wd + (i + pp) * wd +
                                             (j + q)] += w[pp * ww + q] * gy;
                               }
                   });
}

Tensor axis_mat(const Tensor& x,
                std::shared_ptr<const std::vector<double>> m, int k, int n,
                int axis) {
    require(axis >= 0 && axis < x.rank(), "axis_mat axis out of range");
    require(x.shape()[axis] == n, "axis_mat extent mismatch: input " +
                                      shape_str(x.shape()) + " axis " +
                                      std::to_string(axis) + " expected " +
                                      std::to_string(n));
    require(static_cast<long long>(m->size()) ==
                static_cast<long long>(k) * n,
            "axis_mat matrix size mismatch");
    AxisView v = axis_view(x.shape(), axis);
    Shape os = x.shape();
    os[axis] = k;
    std::vector<double> out(v.outer * k * v.inner, 0.0);
    const double* xv = x.data().data();
    const double* mv = m->data();
    for (long long o = 0; o < v.outer; ++o)
        for (int kk = 0; kk < k; ++kk) {
            double* dst = out.data() + (o * k + kk) * v.inner;
            for (int nn = 0; nn < n; ++nn) {
                double coef = mv[kk * n + nn];
                if (coef == 0) continue;
                const double* src = xv + (o * v.extent + nn) * v.inner;
                for (long long i = 0; i < v.inner; ++i) dst[i] += coef * src[i];
            }
        }
    return make_op(os, std::move(out), {x}, [v, k, n, m](Node& node) {
        Node* p = node.parents[0].get();
        if (!p->requires_grad) return;
        double* g = p->grad_data();
        const double* og = node.grad.data();
        const double* mv = m->data();
        for (long long o = 0; o < v.outer; ++o)
            for (int nn = 0; nn < n; ++nn) {
                double* dst = g + (o * v.extent + nn) * v.inner;
                for (int kk = 0; kk < k; ++kk) {
                    double coef = mv[kk * n + nn];
                    if (coef == 0) continue;
                    const double* src = og + (o * k + kk) * v.inner;
                    for (long long i = 0; i < v.inner; ++i)
                        dst[i] += coef * src[i];
                }
            }
    });
}

}  // namespace fusion
