#include "fusion/bscl.hpp"

namespace fusion {

namespace {
constexpr double kDenomFloor = 1e-8;

// gathers every second element along `axis`, starting at `offset`
Tensor stride2(const Tensor& x, int axis, int offset) {
    const Shape& s = x.shape();
    Shape os = s;
    os[axis] = s[axis] / 2;
    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[i];
    for (size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    std::vector<int> map(shape_numel(os));
    long long w = 0;
    for (long long o = 0; o < outer; ++o)
        for (int e = 0; e < os[axis]; ++e)
            for (long long i = 0; i < inner; ++i)
                map[w++] = static_cast<int>((o * s[axis] + 2 * e + offset) *
                                                inner +
                                            i);
    return gather_map(x, os, std::move(map));
}

Tensor sq_mean_abs(const Tensor& a, const Tensor& b) {
    Tensor m = mean_all(abs_t(sub(a, b)));
    return mul(m, m);
}
}  // namespace

LiftPair lift_split(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank())
        throw ShapeError("lift_split axis out of range for " +
                         shape_str(x.shape()));
    if (x.shape()[axis] % 2 != 0)
        throw ShapeError("lift_split: extent " +
                         std::to_string(x.shape()[axis]) + " along axis " +
                         std::to_string(axis) +
                         " is odd; pad or crop to an even extent");
    Tensor c1 = stride2(x, axis, 0);
    Tensor c2 = stride2(x, axis, 1);
    Tensor high = sub(c2, c1);                 // prediction: identity
    Tensor low = add(c1, scale(high, 0.5));    // update: half residual
    return {low, high, axis};
}

Tensor lift_merge(const LiftPair& pair) {
    if (!pair.low.defined() || !pair.high.defined())
        throw ShapeError("lift_merge: undefined bands");
    if (pair.low.shape() != pair.high.shape())
        throw ShapeError("lift_merge: band shapes differ: " +
                         shape_str(pair.low.shape()) + " vs " +
                         shape_str(pair.high.shape()));
    int axis = pair.axis;
    Tensor c1 = sub(pair.low, scale(pair.high, 0.5));
    Tensor c2 = add(pair.high, c1);
    Tensor cat = concat({c1, c2}, axis);

    const Shape& cs = cat.shape();
    int half = pair.low.shape()[axis];
    Shape os = cs;  // same extents, interleaved layout
    long long outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= cs[i];
    for (size_t i = axis + 1; i < cs.size(); ++i) inner *= cs[i];
    std::vector<int> map(shape_numel(os));
    long long w = 0;
    for (long long o = 0; o < outer; ++o)
        for (int e = 0; e < cs[axis]; ++e) {
            long long src = o * cs[axis] + (e % 2 == 0 ? e / 2 : half + e / 2);
            for (long long i = 0; i < inner; ++i)
                map[w++] = static_cast<int>(src * inner + i);
        }
    return gather_map(cat, os, std::move(map));
}

namespace {
Tensor contrastive_ratio(const LiftPair& fused, const Tensor& src_high,
                         const Tensor& src_low) {
    Tensor t1 = div(sq_mean_abs(fused.high, src_high),
                    add_const(sq_mean_abs(fused.high, src_low), kDenomFloor));
    Tensor t2 = div(sq_mean_abs(fused.low, src_low),
                    add_const(sq_mean_abs(fused.low, src_high), kDenomFloor));
    return add(t1, t2);
}
}  // namespace

Tensor loss_fcl(const Tensor& f_mf, const Tensor& f_m1, const Tensor& f_m2) {
    if (f_m1.shape() != f_m2.shape())
        throw ShapeError("loss_fcl: modality shapes differ");
    if (f_mf.rank() != 3 || f_m1.rank() != 3 ||
        f_mf.shape()[0] != 2 * f_m1.shape()[0] ||
        f_mf.shape()[1] != f_m1.shape()[1] ||
        f_mf.shape()[2] != f_m1.shape()[2])
        throw ShapeError("loss_fcl: fused width " + shape_str(f_mf.shape()) +
                         " must be twice the modality width " +
                         shape_str(f_m1.shape()));
    LiftPair pf = lift_split(f_mf, 0);
    LiftPair p1 = lift_split(f_m1, 0);
    LiftPair p2 = lift_split(f_m2, 0);
    Tensor mc_h = concat({p1.high, p2.high}, 0);
    Tensor mc_l = concat({p1.low, p2.low}, 0);
    return contrastive_ratio(pf, mc_h, mc_l);
}

Tensor loss_pcl(const Tensor& i_mf, const Tensor& i_m1, const Tensor& i_m2) {
    if (i_mf.shape() != i_m1.shape() || i_m1.shape() != i_m2.shape())
        throw ShapeError("loss_pcl: image shapes differ: " +
                         shape_str(i_mf.shape()) + ", " +
                         shape_str(i_m1.shape()) + ", " +
                         shape_str(i_m2.shape()));
    const int waxis = i_mf.rank() - 1;
    LiftPair pf = lift_split(i_mf, waxis);
    LiftPair p1 = lift_split(i_m1, waxis);
    LiftPair p2 = lift_split(i_m2, waxis);
    // fused bands tiled across the two source slots
    LiftPair tiled{concat({pf.low, pf.low}, 0), concat({pf.high, pf.high}, 0),
                   waxis};
    Tensor mc_h = concat({p1.high, p2.high}, 0);
    Tensor mc_l = concat({p1.low, p2.low}, 0);
    return contrastive_ratio(tiled, mc_h, mc_l);
}

}  // namespace fusion
