#include "fusion/scan_order.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fusion {

std::vector<int> ScanOrder::storage_indices(int modality1_count) const {
    if (tags.empty()) return indices;
    std::vector<int> out(indices.size());
    for (size_t i = 0; i < indices.size(); ++i)
        out[i] = tags[i] == 1 ? indices[i] : indices[i] + modality1_count;
    return out;
}

bool ScanOrder::is_permutation() const {
    auto check = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        for (size_t i = 0; i < v.size(); ++i)
            if (v[i] != static_cast<int>(i)) return false;
        return true;
    };
    if (tags.empty()) return check(indices);
    std::vector<int> m1, m2;
    for (size_t i = 0; i < indices.size(); ++i)
        (tags[i] == 1 ? m1 : m2).push_back(indices[i]);
    return check(m1) && check(m2);
}

ScanOrder spatial_raster(int h, int w) {
    if (h < 1 || w < 1)
        throw ShapeError("spatial_raster requires H,W >= 1, got " +
                         std::to_string(h) + "x" + std::to_string(w));
    ScanOrder o;
    o.indices.resize(static_cast<size_t>(h) * w);
    std::iota(o.indices.begin(), o.indices.end(), 0);
    return o;
}

ScanOrder channel_order(int c) {
    if (c < 1)
        throw ShapeError("channel_order requires C >= 1");
    ScanOrder o;
    o.indices.resize(c);
    std::iota(o.indices.begin(), o.indices.end(), 0);
    return o;
}

ScanOrder frequency_rotational(int h, int w) {
    if (h < 1 || w < 1)
        throw ShapeError("frequency_rotational requires H,W >= 1");
    struct Bin {
        long long r2;
        double angle;
        int u, v;
    };
    std::vector<Bin> bins;
    bins.reserve(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            // signed centered frequencies; ties at Nyquist keep the positive
            long long su = 2 * u <= h ? u : u - h;
            long long sv = 2 * v <= w ? v : v - w;
            bins.push_back({su * su + sv * sv,
                            std::atan2(static_cast<double>(sv),
                                       static_cast<double>(su)),
                            u, v});
        }
    std::stable_sort(bins.begin(), bins.end(), [](const Bin& a, const Bin& b) {
        if (a.r2 != b.r2) return a.r2 < b.r2;
        if (a.angle != b.angle) return a.angle < b.angle;
        if (a.u != b.u) return a.u < b.u;
        return a.v < b.v;
    });
    ScanOrder o;
    o.indices.reserve(bins.size());
    for (const auto& b : bins) o.indices.push_back(b.u * w + b.v);
    return o;
}

ScanOrder cross_modal_interleave(const ScanOrder& o1, const ScanOrder& o2,
                                 int tag1, int tag2) {
    if (o1.length() != o2.length())
        throw ShapeError("cross_modal_interleave length mismatch: " +
                         std::to_string(o1.length()) + " vs " +
                         std::to_string(o2.length()));
    if (o1.cross_modal() || o2.cross_modal())
        throw ShapeError("cross_modal_interleave expects unimodal inputs");
    ScanOrder o;
    o.indices.reserve(2 * o1.length());
    o.tags.reserve(2 * o1.length());
    for (int i = 0; i < o1.length(); ++i) {
        o.indices.push_back(o1.indices[i]);
        o.tags.push_back(tag1);
        o.indices.push_back(o2.indices[i]);
        o.tags.push_back(tag2);
    }
    return o;
}

ScanOrder reverse(const ScanOrder& o) {
    ScanOrder r;
    r.indices.assign(o.indices.rbegin(), o.indices.rend());
    r.tags.assign(o.tags.rbegin(), o.tags.rend());
    return r;
}

}  // namespace fusion
