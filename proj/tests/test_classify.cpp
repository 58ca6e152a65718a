#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "basinforge/classify.hpp"

#include <cmath>
#include <stdexcept>

using namespace basinforge;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

IntegratorConfig cfg_for(const Model& m) { return default_config(m); }

}  // namespace

TEST_CASE("transient wait rounds up to whole forcing periods") {
    // 20 / (0.015 * 2 pi) = 212.2 periods -> 213
    CHECK(transient_time(0.015) == doctest::Approx(213 * kTwoPi).epsilon(1e-15));
    // 20 / (0.005 * 2 pi) = 636.6 -> 637
    CHECK(transient_time(0.005) == doctest::Approx(637 * kTwoPi).epsilon(1e-15));
    CHECK(transient_time(0.015, 40) == doctest::Approx(425 * kTwoPi).epsilon(1e-15));
    CHECK_THROWS_AS(transient_time(0.0), std::invalid_argument);
    CHECK_THROWS_AS(transient_time(0.01, 0), std::invalid_argument);
}

TEST_CASE("settling accounts for the ramp duration") {
    ClassifierConfig cc;
    Model flat = CubicParams{0.1, Constant{0.015}};
    CHECK(settle_time(flat, cc) == doctest::Approx(213 * kTwoPi).epsilon(1e-15));
    // ramp_end = 25/0.015 = 1666.67; (1666.67 + 213*2pi)/2pi -> ceil = 479
    Model ramped = CubicParams{0.1, LinearRamp{0.015, 25.0}};
    CHECK(settle_time(ramped, cc) == doctest::Approx(479 * kTwoPi).epsilon(1e-15));
    Model exp_ramped = CubicParams{0.1, ExpRamp{0.015, 25.0}};
    CHECK(settle_time(exp_ramped, cc) == doctest::Approx(479 * kTwoPi).epsilon(1e-15));
}

TEST_CASE("labels") {
    CHECK(label_of({AttractorKind::Origin, {}, {}}) == "origin");
    CHECK(label_of({AttractorKind::Unclassified, {}, {}}) == "unclassified");
    CHECK(label_of({AttractorKind::Subharmonic, {1, 2}, {}}) == "1:2");
    CHECK(label_of({AttractorKind::Subharmonic, {-1, 2}, {}}) == "-1:2");
}

TEST_CASE("overdamped oscillator lands on the origin") {
    // gamma above the global attraction bound for eps = 0.1
    Model m = CubicParams{0.1, Constant{0.06}};
    ClassifierConfig cc;
    auto r = classify_attractor(m, {0.9, 0.9, 0.0}, cfg_for(m), cc);
    CHECK(r.kind == AttractorKind::Origin);
    CHECK(label_of(r) == "origin");
}

TEST_CASE("oscillator half-frequency response is found and normalized") {
    Model m = CubicParams{0.1, Constant{0.015}};
    ClassifierConfig cc;
    auto r = classify_attractor(m, {-0.75, 0.0, 0.0}, cfg_for(m), cc);
    REQUIRE(r.kind == AttractorKind::Subharmonic);
    CHECK(r.id == ResonanceId{1, 2});
    // The two strobe points of this cycle are mirror images; the
    // representative is the lexicographically smaller one.
    CHECK(r.representative.q == doctest::Approx(-0.232663).epsilon(2e-3));
    CHECK(r.representative.v == doctest::Approx(0.253258).epsilon(2e-3));
    CHECK(r.representative.t == 0.0);
    CHECK(energy_I(r.representative) > 1e-4);

    // A different basin point reaches the same cycle and representative.
    auto rb = classify_attractor(m, {-0.25, 0.25, 0.0}, cfg_for(m), cc);
    REQUIRE(rb.kind == AttractorKind::Subharmonic);
    CHECK(rb.id == ResonanceId{1, 2});
    CHECK(rb.representative.q == doctest::Approx(r.representative.q).epsilon(1e-4));
    CHECK(rb.representative.v == doctest::Approx(r.representative.v).epsilon(1e-4));

    // Re-classifying from the representative reproduces it.
    auto r2 = classify_attractor(m, r.representative, cfg_for(m), cc);
    REQUIRE(r2.kind == AttractorKind::Subharmonic);
    CHECK(r2.id == ResonanceId{1, 2});
    CHECK(r2.representative.q == doctest::Approx(r.representative.q).epsilon(1e-4));
    CHECK(r2.representative.v == doctest::Approx(r.representative.v).epsilon(1e-4));
}

TEST_CASE("synchronous rotation classifies as 1:1") {
    Model m{make_spin_orbit(0.2056, 1e-3, Constant{0.004})};
    ClassifierConfig cc;
    auto r = classify_attractor(m, {0.1, 1.02, 0.0}, cfg_for(m), cc);
    REQUIRE(r.kind == AttractorKind::Subharmonic);
    CHECK(r.id == ResonanceId{1, 1});
    CHECK(r.representative.q >= 0.0);
    CHECK(r.representative.q < kTwoPi);
    CHECK(r.representative.v == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("three-halves rotation state is identified with its winding") {
    // Below the capture threshold for this resonance, starting near it.
    Model m{make_spin_orbit(0.2056, 1e-3, Constant{0.0012})};
    ClassifierConfig cc;
    auto r = classify_attractor(m, {0.6, 1.5, 0.0}, cfg_for(m), cc);
    REQUIRE(r.kind == AttractorKind::Subharmonic);
    CHECK(r.id == ResonanceId{3, 2});
    CHECK(r.representative.v == doctest::Approx(1.5).epsilon(0.01));
    CHECK(r.representative.q == doctest::Approx(0.990014).epsilon(1e-2));
}

TEST_CASE("unmatchable tolerance yields unclassified") {
    Model m{make_spin_orbit(0.2056, 1e-3, Constant{0.004})};
    ClassifierConfig cc;
    cc.match_tol = 1e-16;
    cc.max_retries = 0;
    auto r = classify_attractor(m, {0.1, 1.02, 0.0}, cfg_for(m), cc);
    CHECK(r.kind == AttractorKind::Unclassified);
    CHECK(label_of(r) == "unclassified");
}

TEST_CASE("classifier input validation") {
    Model m = CubicParams{0.1, Constant{0.0}};
    ClassifierConfig cc;
    CHECK_THROWS_AS(classify_attractor(m, {0.1, 0.1, 0.0}, cfg_for(m), cc),
                    std::invalid_argument);
    Model ok = CubicParams{0.1, Constant{0.01}};
    cc.q_max = 0;
    CHECK_THROWS_AS(classify_attractor(ok, {0.1, 0.1, 0.0}, cfg_for(ok), cc),
                    std::invalid_argument);
    cc = ClassifierConfig{};
    cc.match_tol = 0.0;
    CHECK_THROWS_AS(settle_time(ok, cc), std::invalid_argument);
    cc = ClassifierConfig{};
    cc.window_factor = 1;
    CHECK_THROWS_AS(settle_time(ok, cc), std::invalid_argument);
}
