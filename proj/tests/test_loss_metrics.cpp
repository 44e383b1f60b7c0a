#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dnfs/loss.hpp"
#include "test_util.hpp"

using namespace dnfs;
using testutil::check_gradient;
using testutil::fill_uniform;

namespace {

Tensor64 random_probs(SplitMix64& rng, int n, int h, int w) {
    Tensor64 t(n, 1, h, w);
    for (double& v : t.data) v = rng.uniform(0.02, 0.98);
    return t;
}

Tensor64 random_binary(SplitMix64& rng, int n, int h, int w, double p_black = 0.4) {
    Tensor64 t(n, 1, h, w);
    for (double& v : t.data) v = rng.uniform() < p_black ? 1.0 : 0.0;
    return t;
}

// Brute-force set counting over binarized pixels, independent of the metric
// implementations.
struct SetCounts {
    long inter = 0, uni = 0, black = 0, hits = 0;
};

SetCounts count_sets(const Tensor64& pred, const Tensor64& target, double threshold) {
    SetCounts s;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const bool p = pred.data[i] > threshold;
        const bool y = target.data[i] == 1.0;
        if (p && y) ++s.inter;
        if (p || y) ++s.uni;
        if (y) {
            ++s.black;
            if (p) ++s.hits;
        }
    }
    return s;
}

}  // namespace

TEST_CASE("cross entropy closed-form values") {
    // perfect prediction after clamping
    SplitMix64 rng(30);
    Tensor64 y = random_binary(rng, 1, 4, 4);
    Tensor64 p = y;
    p = clamp_probabilities(p, 1e-7);
    CHECK(cross_entropy_loss(p, y).value <= 1.2e-7);

    // single pixel, y=1, p=0.5 -> ln 2
    Tensor64 one(1, 1, 1, 1, 0.5);
    Tensor64 lbl(1, 1, 1, 1, 1.0);
    CHECK(cross_entropy_loss(one, lbl).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // exact 0/1 predictions are rejected
    Tensor64 bad(1, 1, 1, 1, 1.0);
    CHECK_THROWS_AS(cross_entropy_loss(bad, lbl), std::invalid_argument);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    SplitMix64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor64 p = random_probs(rng, 1, 4, 4);
        Tensor64 y = random_binary(rng, 1, 4, 4);
        const auto r = cross_entropy_loss(p, y);
        auto f = [&] { return cross_entropy_loss(p, y).value; };
        auto st = check_gradient(f, p.data, r.grad.data, 1e-5, 1e-8, 1e-5);
        CHECK_MESSAGE(st.ok, "cross entropy grad max rel err ", st.max_rel);
    }
}

TEST_CASE("jaccard closed-form values") {
    // p == y, all ones -> I == U -> loss 0
    Tensor64 ones(1, 1, 2, 2, 1.0);
    CHECK(jaccard_loss(ones, ones, 1.0).value == doctest::Approx(0.0).epsilon(1e-15));

    // p all zeros, y all ones over 16 pixels, eps 1 -> 16/17
    Tensor64 p(1, 1, 4, 4, 0.0);
    Tensor64 y(1, 1, 4, 4, 1.0);
    const double closed_form = 1.0 - 1.0 / 17.0;
    double inter = 0, uni = 0;  // brute-force route
    for (std::size_t i = 0; i < p.numel(); ++i) {
        inter += p.data[i] * y.data[i];
        uni += p.data[i] + y.data[i];
    }
    uni -= inter;
    CHECK(closed_form == doctest::Approx(1.0 - (inter + 1.0) / (uni + 1.0)).epsilon(1e-15));
    CHECK(jaccard_loss(p, y, 1.0).value == doctest::Approx(closed_form).epsilon(1e-12));
    CHECK(jaccard_loss(p, y, 1.0).value == doctest::Approx(16.0 / 17.0).epsilon(1e-12));
}

TEST_CASE("jaccard gradient matches finite differences") {
    SplitMix64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor64 p = random_probs(rng, 1, 4, 4);
        Tensor64 y = random_binary(rng, 1, 4, 4);
        const auto r = jaccard_loss(p, y, 1.0);
        auto f = [&] { return jaccard_loss(p, y, 1.0).value; };
        auto st = check_gradient(f, p.data, r.grad.data, 1e-5, 1e-8, 1e-5);
        CHECK_MESSAGE(st.ok, "jaccard grad max rel err ", st.max_rel);
    }
}

TEST_CASE("composite loss: endpoints and linearity in psi") {
    SplitMix64 rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor64 p = random_probs(rng, 2, 4, 4);
        Tensor64 y = random_binary(rng, 2, 4, 4);

        const auto ce = cross_entropy_loss(p, y);
        const auto jc = jaccard_loss(p, y, 1.0);
        const auto at1 = composite_loss(p, y, LossConfig{1.0, 1.0, 0.5});
        const auto at0 = composite_loss(p, y, LossConfig{0.0, 1.0, 0.5});
        CHECK(std::abs(at1.value - ce.value) <= 1e-12);
        CHECK(std::abs(at0.value - jc.value) <= 1e-12);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            CHECK(std::abs(at1.grad.data[i] - ce.grad.data[i]) <= 1e-12);
            CHECK(std::abs(at0.grad.data[i] - jc.grad.data[i]) <= 1e-12);
        }

        const double psi = rng.uniform(0.0, 1.0);
        const auto mid = composite_loss(p, y, LossConfig{psi, 1.0, 0.5});
        CHECK(std::abs(mid.value - (psi * at1.value + (1.0 - psi) * at0.value)) <= 1e-12);

        // half/half equals the independent recombination exactly
        const auto half = composite_loss(p, y, LossConfig{0.5, 1.0, 0.5});
        CHECK(half.value == 0.5 * ce.value + 0.5 * jc.value);
    }
}

TEST_CASE("composite loss gradient matches finite differences") {
    SplitMix64 rng(34);
    const LossConfig cfg{0.5, 1.0, 0.5};
    for (int trial = 0; trial < 20; ++trial) {
        Tensor64 p = random_probs(rng, 1, 4, 4);
        Tensor64 y = random_binary(rng, 1, 4, 4);
        const auto r = composite_loss(p, y, cfg);
        auto f = [&] { return composite_loss(p, y, cfg).value; };
        auto st = check_gradient(f, p.data, r.grad.data, 1e-5, 1e-8, 1e-5);
        CHECK_MESSAGE(st.ok, "composite grad max rel err ", st.max_rel);
    }
}

TEST_CASE("loss ranges: jaccard in [0,1), cross entropy >= 0") {
    SplitMix64 rng(35);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor64 p = random_probs(rng, 1, 3, 3);
        Tensor64 y = random_binary(rng, 1, 3, 3);
        const double j = jaccard_loss(p, y, 1.0).value;
        CHECK(j >= 0.0);
        CHECK(j < 1.0);
        CHECK(cross_entropy_loss(p, y).value >= 0.0);
    }
}

TEST_CASE("iou metric trivia and hand-counted case") {
    Tensor64 y(1, 1, 2, 2);
    y.data = {1.0, 0.0, 1.0, 0.0};
    Tensor64 p(1, 1, 2, 2);
    p.data = {0.9, 0.1, 0.8, 0.2};
    CHECK(iou_metric(p, y, 0.5) == 1.0);

    Tensor64 disjoint(1, 1, 2, 2);
    disjoint.data = {0.1, 0.9, 0.2, 0.9};
    CHECK(iou_metric(disjoint, y, 0.5) == 0.0);

    // P = 2 pixels, T = 2 pixels, overlap 1 -> 1/3
    Tensor64 p2(1, 1, 2, 2);
    p2.data = {0.9, 0.9, 0.1, 0.1};
    CHECK(iou_metric(p2, y, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // both sets empty -> 1.0 by convention
    Tensor64 empty_y(1, 1, 2, 2, 0.0);
    Tensor64 low_p(1, 1, 2, 2, 0.1);
    CHECK(iou_metric(low_p, empty_y, 0.5) == 1.0);
}

TEST_CASE("black pixel correctness trivia") {
    Tensor64 y(1, 1, 2, 5, 0.0);
    for (int j = 0; j < 5; ++j) y.at(0, 0, 0, j) = 1.0;  // 5 black pixels
    Tensor64 hit(1, 1, 2, 5, 0.9);
    CHECK(black_pixel_correctness(hit, y, 0.5) == 1.0);
    Tensor64 miss(1, 1, 2, 5, 0.1);
    CHECK(black_pixel_correctness(miss, y, 0.5) == 0.0);

    // 10 black target pixels, 7 predicted black among them -> 0.7
    Tensor64 y10(1, 1, 2, 5, 1.0);
    Tensor64 p7(1, 1, 2, 5, 0.9);
    p7.data[0] = p7.data[1] = p7.data[2] = 0.1;
    CHECK(black_pixel_correctness(p7, y10, 0.5) == doctest::Approx(0.7).epsilon(1e-12));

    Tensor64 all_white(1, 1, 2, 5, 0.0);
    CHECK_THROWS_AS(black_pixel_correctness(hit, all_white, 0.5), std::invalid_argument);
}

TEST_CASE("metric oracles: brute-force set counting on 100 random 8x8 pairs") {
    SplitMix64 rng(36);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor64 p = random_probs(rng, 1, 8, 8);
        Tensor64 y = random_binary(rng, 1, 8, 8, rng.uniform(0.1, 0.9));
        const SetCounts s = count_sets(p, y, 0.5);
        const double want_iou = s.uni == 0 ? 1.0 : double(s.inter) / double(s.uni);
        CHECK(iou_metric(p, y, 0.5) == want_iou);
        if (s.black > 0)
            CHECK(black_pixel_correctness(p, y, 0.5) == double(s.hits) / double(s.black));
    }
}

TEST_CASE("iou is symmetric after binarization; metrics ignore batch order") {
    SplitMix64 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor64 y = random_binary(rng, 1, 6, 6);
        Tensor64 p = random_probs(rng, 1, 6, 6);
        // binarize p so it can stand in as a target
        Tensor64 pb(1, 1, 6, 6);
        for (std::size_t i = 0; i < p.numel(); ++i) pb.data[i] = p.data[i] > 0.5 ? 1.0 : 0.0;
        CHECK(iou_metric(pb, y, 0.5) == iou_metric(y, pb, 0.5));

        // reorder a batch of two: pooled counting must not change
        Tensor64 p2(2, 1, 6, 6), y2(2, 1, 6, 6), p2r(2, 1, 6, 6), y2r(2, 1, 6, 6);
        Tensor64 pa = random_probs(rng, 1, 6, 6), ya = random_binary(rng, 1, 6, 6);
        for (std::size_t i = 0; i < 36; ++i) {
            p2.data[i] = p.data[i];
            p2.data[36 + i] = pa.data[i];
            y2.data[i] = y.data[i];
            y2.data[36 + i] = ya.data[i];
            p2r.data[i] = pa.data[i];
            p2r.data[36 + i] = p.data[i];
            y2r.data[i] = ya.data[i];
            y2r.data[36 + i] = y.data[i];
        }
        CHECK(iou_metric(p2, y2, 0.5) == iou_metric(p2r, y2r, 0.5));
    }
}

TEST_CASE("loss config and mask pair validation") {
    CHECK_THROWS_AS(validate_loss_config(LossConfig{-0.1, 1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(validate_loss_config(LossConfig{0.5, 0.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(validate_loss_config(LossConfig{0.5, 1.0, 1.0}), std::invalid_argument);

    Tensor64 p(1, 1, 2, 2, 0.5);
    Tensor64 y_bad(1, 1, 2, 2, 0.5);  // not binary
    CHECK_THROWS_AS(cross_entropy_loss(p, y_bad), std::invalid_argument);
    Tensor64 y_sized(1, 1, 2, 3, 1.0);
    CHECK_THROWS_AS(cross_entropy_loss(p, y_sized), std::invalid_argument);
}
