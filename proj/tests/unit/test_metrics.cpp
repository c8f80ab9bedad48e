#include "mhm/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace mhm;

namespace {

LandmarkSet five(double dx = 0.0) {
    LandmarkSet s;
    s.coords = {{10.0 + dx, 10.0}, {30.0 + dx, 10.0}, {20.0, 20.0}, {12.0, 30.0}, {28.0, 30.0}};
    return s;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("inter-ocular NRMSE by hand") {
    const LandmarkSet gt = five();
    LandmarkSet pred = gt;
    pred[0].x += 3.0;
    pred[0].y += 4.0;  // error 5
    pred[4].y -= 2.0;  // error 2
    // mean error 7 / 5 = 1.4 px, inter-ocular 20 px -> 7 %
    CHECK(nrmse(pred, gt, default_norm(5)) == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(nrmse(gt, gt, default_norm(5)) == 0.0);
}

TEST_CASE("face-size normalizer") {
    const LandmarkSet gt = five();
    // bbox 20 x 20
    CHECK(normalizer(gt, {NormKind::FaceSize}) == doctest::Approx(20.0));
    LandmarkSet pred = gt;
    pred[2].x += 1.0;
    CHECK(nrmse(pred, gt, NormSpec{NormKind::FaceSize}) == doctest::Approx(100.0 * 0.2 / 20.0));
}

TEST_CASE("68-point default uses outer eye corners") {
    const NormSpec s = default_norm(68);
    CHECK(s.eye_a == 36);
    CHECK(s.eye_b == 45);
}

TEST_CASE("invalid inputs") {
    const LandmarkSet gt = five();
    LandmarkSet four = gt;
    four.coords.pop_back();
    CHECK_THROWS(nrmse(four, gt, default_norm(5)));
    CHECK_THROWS(nrmse(gt, gt, 0.0));
    CHECK_THROWS(normalizer(four, NormSpec{NormKind::InterOcular, 0, 7}));
    LandmarkSet same = gt;
    same[1] = same[0];
    CHECK_THROWS(nrmse(gt, same, default_norm(5)));
    CHECK_THROWS(evaluate({}, {}, default_norm(5)));
    CHECK_THROWS(evaluate({gt}, {gt}, default_norm(5), {{"bad", {9}}}));
}

TEST_CASE("evaluate averages per sample and per group") {
    const LandmarkSet gt = five();
    LandmarkSet p1 = gt, p2 = gt;
    p1[2].x += 2.0;  // nose error 2 -> sample 2/5/20 = 2 %
    p2[3].y += 4.0;  // mouth error 4 -> sample 4 %
    const EvalReport r = evaluate({p1, p2}, {gt, gt}, default_norm(5), default_groups(5));
    REQUIRE(r.per_sample.size() == 2);
    CHECK(r.per_sample[0] == doctest::Approx(2.0));
    CHECK(r.per_sample[1] == doctest::Approx(4.0));
    CHECK(r.mean == doctest::Approx(3.0));
    REQUIRE(r.groups.size() == 3);
    CHECK(r.groups[0].second == 0.0);                        // eyes
    CHECK(r.groups[1].second == doctest::Approx(5.0));       // nose: (10 % + 0) / 2
    CHECK(r.groups[2].second == doctest::Approx(5.0));       // mouth: (0 + 10 %) / 2
}

TEST_CASE("six significant digits") {
    CHECK(fmt6(1.0 / 3.0) == "0.333333");
    CHECK(fmt6(1234567.0) == "1.23457e+06");
    CHECK(fmt6(2.0) == "2");
}

}  // TEST_SUITE
