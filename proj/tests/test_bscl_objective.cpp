#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "fusion/gradcheck.hpp"
#include "fusion/objective.hpp"
#include "test_helpers.hpp"

using namespace fusion;
using namespace fusion::test;

TEST_CASE("Haar lifting of the pair (4, 6)") {
    LiftPair p = lift_split(Tensor::from({2}, {4.0, 6.0}), 0);
    CHECK(p.high.item() == 2.0);
    CHECK(p.low.item() == 5.0);
    Tensor back = lift_merge(p);
    CHECK(back.at(0) == 4.0);
    CHECK(back.at(1) == 6.0);
}

TEST_CASE("constant inputs put everything in the low band") {
    Tensor x = Tensor::full({4, 3, 3}, 0.7);
    LiftPair p = lift_split(x, 0);
    CHECK(max_abs(p.high) == 0.0);
    for (long long i = 0; i < p.low.numel(); ++i) CHECK(p.low.at(i) == 0.7);
}

TEST_CASE("perfect reconstruction on dyadic data, all axes and shapes") {
    Rng rng(3);
    for (const Shape& s : {Shape{4, 6, 8}, Shape{2, 4}, Shape{8}}) {
        for (int axis = 0; axis < static_cast<int>(s.size()); ++axis) {
            if (s[axis] % 2 != 0) continue;
            Tensor x = random_dyadic(s, rng);
            Tensor back = lift_merge(lift_split(x, axis));
            for (long long i = 0; i < x.numel(); ++i)
                CHECK(back.at(i) == x.at(i));  // exact
        }
    }
}

TEST_CASE("integer-valued data reconstructs exactly too") {
    Rng rng(5);
    std::vector<double> v(24);
    for (auto& x : v) x = rng.uniform_int(0, 255);
    Tensor img = Tensor::from({1, 4, 6}, std::move(v));
    Tensor back = lift_merge(lift_split(img, 2));
    for (long long i = 0; i < img.numel(); ++i) CHECK(back.at(i) == img.at(i));
}

TEST_CASE("odd extents are rejected with a pad-or-crop hint") {
    try {
        lift_split(Tensor::zeros({3, 4, 4}), 0);
        CHECK(false);
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("pad or crop") != std::string::npos);
    }
    CHECK_THROWS_AS(lift_merge({Tensor::zeros({2}), Tensor::zeros({3}), 0}),
                    ShapeError);
}

TEST_CASE("white noise splits energy into both bands") {
    Rng rng(7);
    std::vector<double> v(1024);
    for (auto& x : v) x = rng.normal();
    LiftPair p = lift_split(Tensor::from({1024}, std::move(v)), 0);
    auto variance = [](const Tensor& t) {
        double m = 0;
        for (double x : t.data()) m += x;
        m /= t.numel();
        double s = 0;
        for (double x : t.data()) s += (x - m) * (x - m);
        return s / t.numel();
    };
    CHECK(variance(p.low) > 0.1);
    CHECK(variance(p.high) > 0.1);
}

TEST_CASE("feature contrastive loss vanishes under perfect alignment") {
    Rng rng(11);
    Tensor m1 = random_dyadic({4, 4, 4}, rng);
    Tensor m2 = random_dyadic({4, 4, 4}, rng);
    LiftPair p1 = lift_split(m1, 0);
    LiftPair p2 = lift_split(m2, 0);
    Tensor mc_h = concat({p1.high, p2.high}, 0);
    Tensor mc_l = concat({p1.low, p2.low}, 0);
    Tensor fused = lift_merge({mc_l, mc_h, 0});
    CHECK(loss_fcl(fused, m1, m2).item() == 0.0);
}

TEST_CASE("feature contrastive loss penalizes swapped bands") {
    Rng rng(13);
    Tensor m1 = random_tensor({4, 4, 4}, rng);
    Tensor m2 = random_tensor({4, 4, 4}, rng);
    LiftPair p1 = lift_split(m1, 0);
    LiftPair p2 = lift_split(m2, 0);
    Tensor mc_h = concat({p1.high, p2.high}, 0);
    Tensor mc_l = concat({p1.low, p2.low}, 0);
    Tensor aligned = lift_merge({mc_l, mc_h, 0});
    Tensor swapped = lift_merge({mc_h, mc_l, 0});  // high where low belongs
    CHECK(loss_fcl(swapped, m1, m2).item() > loss_fcl(aligned, m1, m2).item());
}

TEST_CASE("feature contrastive loss scalar sanity: 1/4 + 1/4") {
    // sources constant 3 -> mc_h = 0, mc_l = 3; fused bands high 1, low 2
    Tensor m1 = Tensor::full({2, 2, 2}, 3.0);
    Tensor m2 = Tensor::full({2, 2, 2}, 3.0);
    std::vector<double> fused(4 * 4);
    for (int c = 0; c < 4; ++c)
        for (int p = 0; p < 4; ++p) fused[c * 4 + p] = c % 2 == 0 ? 1.5 : 2.5;
    Tensor f = Tensor::from({4, 2, 2}, std::move(fused));
    CHECK(loss_fcl(f, m1, m2).item() == doctest::Approx(0.5).epsilon(1e-7));
}

TEST_CASE("feature contrastive loss rejects width mismatches") {
    CHECK_THROWS_AS(loss_fcl(Tensor::zeros({6, 2, 2}), Tensor::zeros({4, 2, 2}),
                             Tensor::zeros({4, 2, 2})),
                    ShapeError);
    CHECK_THROWS_AS(loss_fcl(Tensor::zeros({8, 2, 2}), Tensor::zeros({4, 2, 2}),
                             Tensor::zeros({4, 4, 2})),
                    ShapeError);
}

TEST_CASE("pixel contrastive loss vanishes when the fused image matches") {
    Rng rng(17);
    Tensor img = random_dyadic({1, 4, 8}, rng);
    CHECK(loss_pcl(img, img, img).item() == 0.0);
}

TEST_CASE("pixel contrastive loss prefers the sharp fused image") {
    // sharp sources: vertical stripes; blurred fused: 1D box filter
    const int h = 8, w = 16;
    std::vector<double> stripes(h * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) stripes[i * w + j] = j % 2 ? 0.9 : 0.1;
    Tensor sharp = Tensor::from({1, h, w}, stripes);
    std::vector<double> blur(h * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double s = stripes[i * w + j];
            int n = 1;
            if (j > 0) {
                s += stripes[i * w + j - 1];
                ++n;
            }
            if (j + 1 < w) {
                s += stripes[i * w + j + 1];
                ++n;
            }
            blur[i * w + j] = s / n;
        }
    Tensor blurred = Tensor::from({1, h, w}, std::move(blur));
    CHECK(loss_pcl(blurred, sharp, sharp).item() >
          loss_pcl(sharp, sharp, sharp).item());
}

TEST_CASE("pixel contrastive loss on constants reduces to the low-band term") {
    Tensor f = Tensor::full({1, 4, 4}, 0.5);
    Tensor a = Tensor::full({1, 4, 4}, 0.25);
    Tensor b = Tensor::full({1, 4, 4}, 0.75);
    double loss = loss_pcl(f, a, b).item();
    // highs are zero: term1 = 0; term2 = (mean|fl-mcl|)^2 / (fl^2 + eps)
    double num = 0.25 * 0.25;
    double den = 0.5 * 0.5 + 1e-8;
    CHECK(loss == doctest::Approx(num / den).epsilon(1e-9));
}

TEST_CASE("contrastive losses pass finite-difference checks") {
    Rng rng(19);
    Parameter f = random_param("f", {4, 4, 4}, rng);
    Parameter m1 = random_param("m1", {2, 4, 4}, rng);
    Parameter m2 = random_param("m2", {2, 4, 4}, rng);
    auto fn = [&]() {
        return loss_fcl(f.tensor(), m1.tensor(), m2.tensor());
    };
    Rng probe(23);
    auto rep = grad_check(fn, {f, m1, m2}, 0, 1e-4, 1e-4, probe);
    CHECK(rep.passed());

    Parameter pf = random_param("pf", {1, 4, 8}, rng, 0.1, 0.9);
    Parameter pa = random_param("pa", {1, 4, 8}, rng, 0.1, 0.9);
    Parameter pb = random_param("pb", {1, 4, 8}, rng, 0.1, 0.9);
    auto fn2 = [&]() {
        return loss_pcl(pf.tensor(), pa.tensor(), pb.tensor());
    };
    auto rep2 = grad_check(fn2, {pf, pa, pb}, 0, 1e-4, 1e-4, probe);
    CHECK(rep2.passed());
}

// -------------------------------------------------------------- objective

TEST_CASE("ssim of an image with itself is 1") {
    Rng rng(29);
    Tensor x = random_tensor({1, 16, 16}, rng, 0, 1);
    CHECK(ssim(x, x).item() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(loss_ssim(x, x, x).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ssim of a half-plane against its negative is far from 1") {
    std::vector<double> v(16 * 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) v[i * 16 + j] = j < 8 ? 0.0 : 1.0;
    Tensor x = Tensor::from({1, 16, 16}, std::move(v));
    Tensor y = add_const(neg(x), 1.0);  // 1 - x
    CHECK(ssim(x, y).item() < 0.1);
}

TEST_CASE("ssim is symmetric") {
    Rng rng(31);
    Tensor x = random_tensor({1, 12, 14}, rng, 0, 1);
    Tensor y = random_tensor({1, 12, 14}, rng, 0, 1);
    CHECK(ssim(x, y).item() ==
          doctest::Approx(ssim(y, x).item()).epsilon(1e-12));
    double v = ssim(x, y).item();
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
}

TEST_CASE("ssim rejects images smaller than the window") {
    Tensor small = Tensor::zeros({1, 10, 16});
    CHECK_THROWS_AS(ssim(small, small), ShapeError);
}

TEST_CASE("intensity loss targets the element-wise maximum") {
    Rng rng(37);
    Tensor a = random_tensor({1, 6, 6}, rng, 0, 1);
    Tensor b = random_tensor({1, 6, 6}, rng, 0, 1);
    Tensor target = emax(a, b);
    CHECK(loss_int(target, a, b).item() == 0.0);

    Tensor zeros = Tensor::zeros({1, 4, 4});
    Tensor ones = Tensor::full({1, 4, 4}, 1.0);
    Tensor half = Tensor::full({1, 4, 4}, 0.5);
    CHECK(loss_int(half, zeros, ones).item() == doctest::Approx(0.5).epsilon(1e-15));

    // per-pixel loop oracle
    Tensor f = random_tensor({1, 6, 6}, rng, 0, 1);
    double expect = 0;
    for (long long i = 0; i < f.numel(); ++i)
        expect += std::fabs(f.at(i) - std::max(a.at(i), b.at(i)));
    expect /= f.numel();
    CHECK(loss_int(f, a, b).item() == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("default weights sum the unit components to 4.2") {
    LossWeights w;
    double total = w.fcl * 1.0 + w.pcl * 1.0 + w.mccm * 1.0 + w.ssim * 1.0 +
                   w.intensity * 1.0;
    CHECK(total == doctest::Approx(4.2).epsilon(1e-15));
}

TEST_CASE("ssim gradients match finite differences") {
    Rng rng(41);
    Parameter x = random_param("x", {1, 12, 12}, rng, 0.1, 0.9);
    Parameter y = random_param("y", {1, 12, 12}, rng, 0.1, 0.9);
    auto fn = [&]() { return ssim(x.tensor(), y.tensor()); };
    Rng probe(43);
    auto rep = grad_check(fn, {x, y}, 8, 1e-4, 1e-4, probe);
    CHECK(rep.passed());
}
