#include "fusion/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fusion/image_io.hpp"

namespace fusion {

std::pair<Tensor, Tensor> synth_pair(int size, Rng& rng) {
    if (size < 4) throw UsageError("synth_pair: size must be >= 4");
    const int h = size, w = size;
    const size_t hw = static_cast<size_t>(h) * w;

    // smooth field from up to 3 low-order sinusoids
    std::vector<double> field(hw, 0.0);
    int waves = rng.uniform_int(1, 3);
    for (int m = 0; m < waves; ++m) {
        int fx = rng.uniform_int(0, 3), fy = rng.uniform_int(0, 3);
        if (fx == 0 && fy == 0) fx = 1;
        double amp = rng.uniform(0.5, 1.0);
        double phase = rng.uniform(0.0, 2.0 * M_PI);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j)
                field[static_cast<size_t>(i) * w + j] +=
                    amp * std::sin(2.0 * M_PI * (fx * i + fy * j) / size +
                                   phase);
    }
    double lo = field[0], hi = field[0];
    for (double v : field) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = hi - lo > 1e-12 ? hi - lo : 1.0;
    for (auto& v : field) v = (v - lo) / span;

    // bright blobs over the smooth base; their footprint becomes the mask
    std::vector<double> blob(hw, 0.0);
    int nblobs = rng.uniform_int(1, 3);
    for (int m = 0; m < nblobs; ++m) {
        double ci = rng.uniform(0.2, 0.8) * h;
        double cj = rng.uniform(0.2, 0.8) * w;
        double r = rng.uniform(size / 8.0, size / 5.0);
        double peak = rng.uniform(0.65, 0.9);
        double s2 = 2.0 * (r / 2.0) * (r / 2.0);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
                blob[static_cast<size_t>(i) * w + j] = std::max(
                    blob[static_cast<size_t>(i) * w + j],
                    peak * std::exp(-d2 / s2));
            }
    }

    // A's smooth base plus the blob tail stays below B's texture trough
    // outside the mask, so the element-wise maximum keeps the texture
    // unclipped there
    std::vector<double> a(hw);
    std::vector<char> mask(hw);
    for (size_t p = 0; p < hw; ++p) {
        a[p] = std::clamp(0.04 + 0.12 * field[p] + blob[p], 0.0, 1.0);
        mask[p] = blob[p] > 0.04 ? 1 : 0;
    }

    // high-frequency texture: stripe-dominant checker/stripe mixture
    int cell = rng.uniform_int(4, 6);
    double period = rng.uniform(6.0, 10.0);
    double dirx = rng.uniform(-1.0, 1.0), diry = rng.uniform(-1.0, 1.0);
    double dnorm = std::hypot(dirx, diry);
    if (dnorm < 1e-9) {
        dirx = 1;
        diry = 0;
        dnorm = 1;
    }
    dirx /= dnorm;
    diry /= dnorm;
    double mixw = rng.uniform(0.15, 0.4);
    std::vector<double> b(hw);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            size_t p = static_cast<size_t>(i) * w + j;
            if (mask[p]) {
                b[p] = 0.08 + 0.04 * (i + j) / (2.0 * size);
            } else {
                double checker = ((i / cell + j / cell) % 2 == 0) ? 1.0 : -1.0;
                double stripe =
                    std::sin(2.0 * M_PI * (dirx * i + diry * j) / period);
                double pattern = mixw * checker + (1.0 - mixw) * stripe;
                b[p] = std::clamp(0.5 + 0.3 * pattern, 0.0, 1.0);
            }
        }

    return {Tensor::from({1, h, w}, std::move(a)),
            Tensor::from({1, h, w}, std::move(b))};
}

namespace {
std::string pair_path(const std::string& dir, int index, char which) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "pair_%04d_%c.pgm", index, which);
    return (std::filesystem::path(dir) / buf).string();
}
}  // namespace

void generate_corpus(const std::string& dir, int count, int size,
                     uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create corpus directory: " + dir);
    for (int i = 0; i < count; ++i) {
        Rng rng(seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(i + 1));
        auto [a, b] = synth_pair(size, rng);
        write_pgm(pair_path(dir, i, 'a'), a);
        write_pgm(pair_path(dir, i, 'b'), b);
    }
}

std::vector<std::pair<Tensor, Tensor>> load_corpus(const std::string& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("corpus directory not found: " + dir);
    std::vector<std::pair<Tensor, Tensor>> pairs;
    for (int i = 0;; ++i) {
        std::string pa = pair_path(dir, i, 'a');
        std::string pb = pair_path(dir, i, 'b');
        if (!std::filesystem::exists(pa)) break;
        if (!std::filesystem::exists(pb))
            throw IoError("corpus pair incomplete: missing " + pb);
        pairs.emplace_back(read_image(pa), read_image(pb));
    }
    if (pairs.empty()) throw IoError("no pair_NNNN_{a,b}.pgm files in " + dir);
    return pairs;
}

}  // namespace fusion
