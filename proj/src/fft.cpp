#include "fusion/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace fusion {

namespace {

using Table = std::shared_ptr<const std::vector<double>>;

// cos/sin DFT tables per transform size, shared across calls
std::pair<Table, Table> dft_tables(int n) {
    static std::map<int, std::pair<Table, Table>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    auto c = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * n);
    auto s = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) {
            // reduce k*j mod n first so large products keep full precision
            long long m = (static_cast<long long>(k) * j) % n;
            double theta = 2.0 * M_PI * static_cast<double>(m) / n;
            (*c)[static_cast<size_t>(k) * n + j] = std::cos(theta);
            (*s)[static_cast<size_t>(k) * n + j] = std::sin(theta);
        }
    cache[n] = {c, s};
    return {c, s};
}

// one separable pass: multiplies by e^{sign*2*pi*i*kj/N} along `axis`
ComplexTensor dft_axis(const ComplexTensor& z, int axis, int sign) {
    int n = z.shape()[axis];
    auto [c, s] = dft_tables(n);
    Tensor cre = axis_mat(z.re, c, n, n, axis);
    Tensor cim = axis_mat(z.im, c, n, n, axis);
    Tensor sre = axis_mat(z.re, s, n, n, axis);
    Tensor sim = axis_mat(z.im, s, n, n, axis);
    if (sign < 0) return {add(cre, sim), sub(cim, sre)};
    return {sub(cre, sim), add(cim, sre)};
}

}  // namespace

ComplexTensor fft2(const Tensor& x) {
    if (x.rank() != 3)
        throw ShapeError("fft2 expects [C,H,W], got " + shape_str(x.shape()));
    ComplexTensor z{x, Tensor::zeros(x.shape())};
    z = dft_axis(z, 2, -1);
    z = dft_axis(z, 1, -1);
    return z;
}

ComplexTensor ifft2(const ComplexTensor& z) {
    if (z.re.rank() != 3 || z.re.shape() != z.im.shape())
        throw ShapeError("ifft2 expects matching [C,H,W] re/im");
    ComplexTensor out = dft_axis(z, 2, 1);
    out = dft_axis(out, 1, 1);
    double norm = 1.0 / (static_cast<double>(z.shape()[1]) * z.shape()[2]);
    return {scale(out.re, norm), scale(out.im, norm)};
}

Tensor ifft2_real(const ComplexTensor& z, double* max_im_residue) {
    ComplexTensor out = ifft2(z);
    if (max_im_residue) {
        double mx = 0;
        for (double v : out.im.data()) mx = std::max(mx, std::fabs(v));
        *max_im_residue = mx;
    }
    return out.re;
}

std::pair<Tensor, Tensor> amp_phase(const ComplexTensor& z) {
    if (z.re.shape() != z.im.shape())
        throw ShapeError("amp_phase: re/im shape mismatch");
    return {hypot_t(z.re, z.im), atan2_t(z.im, z.re)};
}

ComplexTensor recompose(const Tensor& amp, const Tensor& phase) {
    if (amp.shape() != phase.shape())
        throw ShapeError("recompose: amp/phase shape mismatch");
    for (double v : amp.data())
        if (v < 0)
            throw ShapeError("recompose: negative amplitude " +
                             std::to_string(v));
    return {mul(amp, cos_t(phase)), mul(amp, sin_t(phase))};
}

ComplexTensor hermitian_symmetrize(const ComplexTensor& z) {
    if (z.re.rank() != 3)
        throw ShapeError("hermitian_symmetrize expects [C,H,W]");
    int c = z.shape()[0], h = z.shape()[1], w = z.shape()[2];
    std::vector<int> map(static_cast<size_t>(c) * h * w);
    for (int ch = 0; ch < c; ++ch)
        for (int u = 0; u < h; ++u)
            for (int v = 0; v < w; ++v) {
                int mu = (h - u) % h, mv = (w - v) % w;
                map[(ch * h + u) * w + v] = (ch * h + mu) * w + mv;
            }
    Tensor mre = gather_map(z.re, z.re.shape(), map);
    Tensor mim = gather_map(z.im, z.im.shape(), std::move(map));
    return {scale(add(z.re, mre), 0.5), scale(sub(z.im, mim), 0.5)};
}

}  // namespace fusion
