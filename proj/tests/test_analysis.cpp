#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "basinforge/analysis.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

using namespace basinforge;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
const double kRoot2Inv = std::sqrt(0.5);

std::string data_path() {
    const char* p = std::getenv("BASINFORGE_DATA");
    REQUIRE_MESSAGE(p != nullptr, "BASINFORGE_DATA must point at the catalogue");
    return p;
}

}  // namespace

TEST_CASE("complete elliptic integral") {
    CHECK(elliptic_K(0.0) == doctest::Approx(M_PI / 2.0).epsilon(1e-15));
    CHECK(elliptic_K(kRoot2Inv) ==
          doctest::Approx(1.8540746773013717).epsilon(1e-14));
    CHECK(elliptic_K(0.5) == doctest::Approx(1.685750354812596).epsilon(1e-14));
    CHECK(elliptic_K(0.99) == doctest::Approx(3.3566005233611915).epsilon(1e-14));
    CHECK(elliptic_K(0.3) < elliptic_K(0.6));
    CHECK_THROWS_AS(elliptic_K(1.0), std::invalid_argument);
    CHECK_THROWS_AS(elliptic_K(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(elliptic_K(std::nan("")), std::invalid_argument);
}

TEST_CASE("jacobi functions satisfy the standard identities") {
    const double us[] = {-7.3, -2.1, -0.4, 0.0, 0.3, 1.7, 4.9, 12.8};
    const double ks[] = {0.0, 0.3, kRoot2Inv, 0.95};
    for (double k : ks) {
        for (double u : us) {
            const auto jv = jacobi_elliptic(u, k);
            CHECK(jv.sn * jv.sn + jv.cn * jv.cn == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(jv.dn * jv.dn + k * k * jv.sn * jv.sn ==
                  doctest::Approx(1.0).epsilon(1e-12));
            const auto neg = jacobi_elliptic(-u, k);
            CHECK(neg.sn == doctest::Approx(-jv.sn).epsilon(1e-12));
            CHECK(neg.cn == doctest::Approx(jv.cn).epsilon(1e-12));
            if (k == 0.0) {
                CHECK(jv.sn == doctest::Approx(std::sin(u)).epsilon(1e-12));
                CHECK(jv.cn == doctest::Approx(std::cos(u)).epsilon(1e-12));
                CHECK(jv.dn == doctest::Approx(1.0).epsilon(1e-15));
            }
            // Derivatives: sn' = cn dn, cn' = -sn dn, dn' = -k^2 sn cn.
            const double h = 1e-6;
            const auto hi = jacobi_elliptic(u + h, k);
            const auto lo = jacobi_elliptic(u - h, k);
            CHECK((hi.sn - lo.sn) / (2.0 * h) ==
                  doctest::Approx(jv.cn * jv.dn).epsilon(5e-9));
            CHECK((hi.cn - lo.cn) / (2.0 * h) ==
                  doctest::Approx(-jv.sn * jv.dn).epsilon(5e-9));
            CHECK((hi.dn - lo.dn) / (2.0 * h) -
                      (-k * k * jv.sn * jv.cn) ==
                  doctest::Approx(0.0).epsilon(5e-9));
        }
        // Quarter and full periods.
        const double K = elliptic_K(k);
        const auto quarter = jacobi_elliptic(K, k);
        CHECK(quarter.sn == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(quarter.cn == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(quarter.dn ==
              doctest::Approx(std::sqrt(1.0 - k * k)).epsilon(1e-12));
        const auto half = jacobi_elliptic(2.0 * K, k);
        CHECK(half.sn == doctest::Approx(0.0).epsilon(1e-10));
        CHECK(half.cn == doctest::Approx(-1.0).epsilon(1e-12));
        const auto base = jacobi_elliptic(0.37, k);
        const auto wrapped = jacobi_elliptic(0.37 + 4.0 * K, k);
        CHECK(wrapped.sn == doctest::Approx(base.sn).epsilon(1e-10));
        CHECK(wrapped.cn == doctest::Approx(base.cn).epsilon(1e-10));
    }
    CHECK_THROWS_AS(jacobi_elliptic(0.5, 1.0), std::invalid_argument);
}

TEST_CASE("orbit amplitude is linear in frequency") {
    CHECK(orbit_amplitude(1.0) ==
          doctest::Approx(1.180340599016096).epsilon(1e-14));
    CHECK(orbit_amplitude(0.5) ==
          doctest::Approx(0.590170299508048).epsilon(1e-14));
    CHECK(orbit_amplitude(1.5) ==
          doctest::Approx(1.770510898524144).epsilon(1e-14));
    CHECK(orbit_amplitude(0.25) ==
          doctest::Approx(0.295085149754024).epsilon(1e-14));
    CHECK(orbit_amplitude(3.7) ==
          doctest::Approx(3.7 * orbit_amplitude(1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(orbit_amplitude(0.0), std::invalid_argument);
    CHECK_THROWS_AS(orbit_amplitude(-2.0), std::invalid_argument);
}

TEST_CASE("closed-form free oscillation matches the integrator") {
    // The undriven, undamped oscillator started at (A, 0) follows the cn
    // orbit exactly; this pins the elliptic code and the steppers together.
    const Model m = CubicParams{0.0, Constant{0.0}};
    const auto cfg = default_config(m);
    for (double omega : {1.0, 0.5}) {
        const PhaseState start = oscillator_orbit_point(omega, 0.0);
        CHECK(start.v == doctest::Approx(0.0).epsilon(1e-15));
        for (double t : {0.7, kTwoPi, 13.9}) {
            const auto got = integrate_to(m, start, t, cfg);
            const auto want = oscillator_orbit_point(omega, t);
            CHECK(got.q == doctest::Approx(want.q).epsilon(1e-9));
            CHECK(got.v == doctest::Approx(want.v).epsilon(1e-9));
        }
        // One orbit period closes, and the first integral stays on A^4/4.
        const double period = kTwoPi / omega;
        const auto closed = oscillator_orbit_point(omega, period);
        CHECK(closed.q == doctest::Approx(start.q).epsilon(1e-12));
        CHECK(closed.v == doctest::Approx(0.0).epsilon(1e-12));
        const double amp = orbit_amplitude(omega);
        for (double t : {0.3, 1.9, 4.4}) {
            const auto pt = oscillator_orbit_point(omega, t);
            CHECK(energy_I(pt) ==
                  doctest::Approx(std::pow(amp, 4) / 4.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("rotational threshold coefficients across the catalogue") {
    struct Cell {
        double e;
        double c[6];  // omega = 1/2, 3/2, 2, 5/2, 3, 7/2
    };
    const Cell cells[] = {
        {0.0549, {5.487932934e-02, 3.817597224e-01, 2.544497009e-02,
                  1.927883543e-03, 1.513096437e-04, 1.186276151e-05}},
        {0.2056, {2.045231932e-01, 1.308383017e+00, 3.250582590e-01,
                  9.162601649e-02, 2.976251806e-02, 8.738555097e-03}},
        {0.0013, {1.299999725e-03, 9.099966221e-03, 1.436494526e-05,
                  2.578413128e-08, 4.757191563e-11, 8.831629445e-14}},
        {0.0041, {4.099991385e-03, 2.869894035e-02, 1.428795840e-04,
                  8.088318036e-07, 4.706658166e-09, 2.755772493e-11}},
        {0.0047, {4.699987022e-03, 3.289840374e-02, 1.877556473e-04,
                  1.218413512e-06, 8.127718666e-09, 5.455233783e-11}},
        {0.0022, {2.199998669e-03, 1.539983629e-02, 4.113955101e-05,
                  1.249646561e-07, 3.901826500e-10, 1.225850423e-12}},
    };
    const int ps[] = {1, 3, 2, 5, 3, 7};
    const int qs[] = {2, 2, 1, 2, 1, 2};
    for (const auto& cell : cells) {
        for (int j = 0; j < 6; ++j) {
            CHECK(spin_orbit_threshold_coefficient(ps[j], qs[j], cell.e) ==
                  doctest::Approx(cell.c[j]).epsilon(1e-9));
        }
    }
    CHECK(std::isinf(spin_orbit_threshold_coefficient(1, 1, 0.2056)));
    CHECK(spin_orbit_threshold_coefficient(0, 1, 0.2) == 0.0);   // no mode 0
    CHECK(spin_orbit_threshold_coefficient(4, 1, 0.2) == 0.0);   // above 7/2
    CHECK(spin_orbit_threshold_coefficient(-2, 1, 0.2) == 0.0);  // below -3/2
    CHECK(spin_orbit_threshold_coefficient(5, 3, 0.2) == 0.0);   // 10/3 uncarried
    CHECK(spin_orbit_threshold_coefficient(-3, 2, 0.2056) ==
          doctest::Approx(0.8 * 1.1624133931214978e-05).epsilon(1e-12));
    CHECK_THROWS_AS(spin_orbit_threshold_coefficient(2, 4, 0.2),
                    std::invalid_argument);
    CHECK_THROWS_AS(spin_orbit_threshold_coefficient(1, 0, 0.2),
                    std::invalid_argument);
    CHECK_THROWS_AS(spin_orbit_threshold_coefficient(1, 2, 0.7),
                    std::invalid_argument);
}

TEST_CASE("oscillator threshold table") {
    CHECK(cubic_threshold_table().size() == 10);
    for (const auto& row : cubic_threshold_table()) {
        CHECK(row.p == 1);
        CHECK(row.coefficient > 0.0);
        // Even denominators respond at first order, odd at second.
        CHECK(row.order == (row.q % 2 == 0 ? 1 : 2));
    }
    auto half = cubic_threshold_reference(1, 2);
    REQUIRE(half.has_value());
    CHECK(half->order == 1);
    CHECK(half->coefficient == doctest::Approx(0.178442).epsilon(1e-12));
    auto ninth = cubic_threshold_reference(1, 9);
    REQUIRE(ninth.has_value());
    CHECK(ninth->order == 2);
    CHECK(ninth->coefficient == doctest::Approx(2e-6).epsilon(1e-12));
    CHECK(!cubic_threshold_reference(2, 3).has_value());
    CHECK(!cubic_threshold_reference(1, 11).has_value());
}

TEST_CASE("first-order cycle angles balance the averaged torque") {
    const double e = 0.2056;
    const double a3 = fourier_coefficient(3, e);
    // s = C (p/q - 1) / (2 a_3); pick C so that s = -1/2 exactly.
    const double C = -0.5 * 2.0 * a3 / 0.5;
    auto pair = spin_orbit_cycle_angles(3, 2, e, C);
    REQUIRE(pair.has_value());
    CHECK(pair->lower == doctest::Approx(1.8325957145940461).epsilon(1e-12));
    CHECK(pair->upper == doctest::Approx(2.8797932657906435).epsilon(1e-12));
    CHECK(std::sin(2.0 * pair->lower) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(std::sin(2.0 * pair->upper) == doctest::Approx(-0.5).epsilon(1e-12));

    auto plus = spin_orbit_cycle_angles(3, 2, e, -C);
    REQUIRE(plus.has_value());
    CHECK(plus->lower == doctest::Approx(0.26179938779914946).epsilon(1e-12));
    CHECK(plus->upper == doctest::Approx(1.308996938995747).epsilon(1e-12));

    auto free = spin_orbit_cycle_angles(3, 2, e, 0.0);
    REQUIRE(free.has_value());
    CHECK(free->lower == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(free->upper == doctest::Approx(M_PI / 2.0).epsilon(1e-15));

    auto sync = spin_orbit_cycle_angles(1, 1, e, 123.0);
    REQUIRE(sync.has_value());
    CHECK(sync->lower == 0.0);
    CHECK(sync->upper == doctest::Approx(M_PI / 2.0).epsilon(1e-15));

    CHECK(!spin_orbit_cycle_angles(3, 2, e, 2.0).has_value());  // |s| > 1
    CHECK(!spin_orbit_cycle_angles(5, 3, e, 0.1).has_value());  // uncarried
    CHECK_THROWS_AS(spin_orbit_cycle_angles(2, 4, e, 0.1), std::invalid_argument);
}

TEST_CASE("Newton shooting pins the captured oscillator cycle") {
    const Model m = CubicParams{0.1, Constant{0.015}};
    const auto cfg = default_config(m);
    // Guess near the Monte Carlo representative of the half-frequency basin.
    auto orbit = find_periodic_orbit(m, 1, 2, {-0.2327, 0.2533, 0.0}, cfg);
    REQUIRE(orbit.has_value());
    CHECK(orbit->residual <= 1e-10);
    CHECK(orbit->iterations <= 10);
    CHECK(orbit->p == 1);
    CHECK(orbit->q == 2);

    // The strobe-minimal cycle point agrees with the classifier output.
    const auto other = integrate_to(m, orbit->point, orbit->point.t + kTwoPi, cfg);
    PhaseState rep = orbit->point;
    if (other.q < rep.q || (other.q == rep.q && other.v < rep.v)) rep = other;
    CHECK(rep.q == doctest::Approx(-0.232663).epsilon(5e-4));
    CHECK(rep.v == doctest::Approx(0.253258).epsilon(5e-4));

    // Same cycle reachable from unperturbed-orbit seeds.
    bool found = false;
    for (int j = 0; j < 8 && !found; ++j) {
        PhaseState seed = oscillator_orbit_point(0.5, kTwoPi * 2.0 * j / 8.0);
        seed.t = 0.0;
        if (auto alt = find_periodic_orbit(m, 1, 2, seed, cfg)) found = true;
    }
    CHECK(found);

    const auto info = orbit_stability(m, *orbit, cfg);
    CHECK(info.period == doctest::Approx(2.0 * kTwoPi).epsilon(1e-15));
    CHECK(info.det == doctest::Approx(std::exp(-0.015 * 2.0 * kTwoPi)).epsilon(1e-8));
    CHECK(info.complex_pair);
    CHECK(info.mult_mod[0] == doctest::Approx(std::exp(-0.015 * kTwoPi)).epsilon(1e-8));
    CHECK(info.lyapunov[0] == doctest::Approx(-0.0075).epsilon(1e-6));
    CHECK(info.lyapunov[1] == doctest::Approx(-0.0075).epsilon(1e-6));
}

TEST_CASE("Newton shooting rejects the trivial fixed point") {
    const Model m = CubicParams{0.1, Constant{0.015}};
    const auto cfg = default_config(m);
    // Near the origin the cubic stiffness vanishes, so the period map has a
    // line of near-fixed directions; the search must not report a cycle.
    CHECK(!find_periodic_orbit(m, 1, 2, {1e-3, 0.0, 0.0}, cfg).has_value());
    CHECK(!find_periodic_orbit(m, 1, 3, {1e-2, 0.0, 0.0}, cfg).has_value());
    // Wrong winding: a 1:2 seed cannot deliver a 1:1 cycle.
    CHECK(!find_periodic_orbit(m, 1, 1, {-0.2327, 0.2533, 0.0}, cfg).has_value());
    CHECK_THROWS_AS(find_periodic_orbit(m, 1, 2, {0.5, 0.0, 0.0}, cfg, -1.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(find_periodic_orbit(m, 2, 4, {0.5, 0.0, 0.0}, cfg),
                    std::invalid_argument);
}

TEST_CASE("Newton shooting handles rotational cycles") {
    const double e = 0.2056;
    const Model sync_m = make_spin_orbit(e, 1e-3, Constant{0.004});
    const auto cfg = default_config(sync_m);
    // Libration about the long-axis lock: node at pi/2, saddle at 0.
    auto node = find_periodic_orbit(sync_m, 1, 1, {M_PI / 2.0, 1.0, 0.0}, cfg);
    REQUIRE(node.has_value());
    CHECK(node->residual <= 1e-10);
    CHECK(node->point.v == doctest::Approx(1.0).epsilon(1e-2));
    const auto info = orbit_stability(sync_m, *node, cfg);
    CHECK(info.complex_pair);
    CHECK(info.det == doctest::Approx(std::exp(-0.004 * kTwoPi)).epsilon(1e-8));
    CHECK(info.lyapunov[0] == doctest::Approx(-0.002).epsilon(1e-7));

    auto saddle = find_periodic_orbit(sync_m, 1, 1, {0.0, 1.0, 0.0}, cfg);
    REQUIRE(saddle.has_value());
    const auto sinfo = orbit_stability(sync_m, *saddle, cfg);
    CHECK(!sinfo.complex_pair);
    CHECK(sinfo.lyapunov[0] > 0.0);
    CHECK(sinfo.lyapunov[1] < 0.0);
    // Liouville: the exponents sum to minus the mean damping.
    CHECK(sinfo.lyapunov[0] + sinfo.lyapunov[1] ==
          doctest::Approx(-0.004).epsilon(1e-7));
    CHECK(sinfo.det == doctest::Approx(std::exp(-0.004 * kTwoPi)).epsilon(1e-8));

    const Model m32 = make_spin_orbit(e, 1e-3, Constant{0.0012});
    auto angles = spin_orbit_cycle_angles(3, 2, e, 0.0012 / 1e-3);
    REQUIRE(angles.has_value());
    bool found32 = false;
    for (double th : {angles->upper, angles->lower}) {
        if (auto orbit = find_periodic_orbit(m32, 3, 2, {th, 1.5, 0.0}, cfg)) {
            found32 = true;
            CHECK(orbit->point.v == doctest::Approx(1.5).epsilon(2e-2));
            // The map itself enforced the 3-turn advance over two periods.
            const auto end = integrate_to(m32, orbit->point,
                                          orbit->point.t + 2.0 * kTwoPi, cfg);
            CHECK(end.q - orbit->point.q ==
                  doctest::Approx(3.0 * kTwoPi).epsilon(1e-9));
            break;
        }
    }
    CHECK(found32);
}

TEST_CASE("empirical thresholds match the perturbative coefficients") {
    const IntegratorConfig tcfg = default_config(Model{CubicParams{0.01, Constant{0.001}}});
    auto cubic = cubic_empirical_threshold(0.01, 1, 2, tcfg, {0.0012, 0.0024});
    REQUIRE(cubic.has_value());
    CHECK(cubic->gamma_hi - cubic->gamma_lo <=
          1.0001e-3 * cubic->gamma_lo);
    CHECK(cubic->value() == doctest::Approx(0.00178442).epsilon(0.05));
    CHECK(cubic->bisections >= 8);

    const IntegratorConfig rcfg =
        default_config(Model{make_spin_orbit(0.2056, 1e-3, Constant{0.001})});
    auto rot = spin_orbit_empirical_threshold(0.2056, 1e-3, 3, 2, rcfg,
                                              {0.0008, 0.0018});
    REQUIRE(rot.has_value());
    CHECK(rot->value() == doctest::Approx(1.308383017e-3).epsilon(0.05));

    // Brackets that do not straddle the threshold are rejected.
    CHECK(!cubic_empirical_threshold(0.01, 1, 2, tcfg, {0.003, 0.006}).has_value());
    CHECK(!cubic_empirical_threshold(0.01, 1, 2, tcfg, {0.0005, 0.001}).has_value());
    CHECK_THROWS_AS(cubic_empirical_threshold(0.01, 1, 2, tcfg, {0.002, 0.001}),
                    std::invalid_argument);
}

TEST_CASE("satellite catalogue loads and derives model parameters") {
    const auto rows = load_satellites_file(data_path());
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].pair == "e-m");
    CHECK(rows[0].satellite == "Moon");
    CHECK(rows[1].pair == "s-m");
    CHECK(rows[5].satellite == "Dione");

    const auto moon = derive_parameters(rows[0]);
    CHECK(moon.X == doctest::Approx(7.5044297670e-06).epsilon(1e-6));
    CHECK(moon.eps == doctest::Approx(6.7539867903e-07).epsilon(1e-6));
    CHECK(moon.gamma == doctest::Approx(3.7522148835e-08).epsilon(1e-6));
    CHECK(moon.gamma_per_year == doctest::Approx(3.1517428297e-06).epsilon(1e-6));

    const auto mercury = derive_parameters(rows[1]);
    CHECK(mercury.eps == doctest::Approx(8.1079395528e-07).epsilon(1e-6));
    CHECK(mercury.gamma == doctest::Approx(3.2431758211e-08).epsilon(1e-6));
    CHECK(mercury.gamma_per_year ==
          doctest::Approx(8.4607885373e-07).epsilon(1e-6));

    const double gyr[] = {0.0, 0.0, 6.1230422953e-03, 2.2221020692e-01,
                          1.0479757827e+00, 1.4365377480e-01};
    for (int i = 2; i < 6; ++i) {
        CHECK(derive_parameters(rows[i]).gamma_per_year ==
              doctest::Approx(gyr[i]).epsilon(1e-6));
    }
}

TEST_CASE("satellite csv rejects malformed input") {
    const std::string header =
        "pair,primary,satellite,e,omega_T,M,M0,R,rho,k2,xi,Q,h2";
    const std::string row =
        "e-m,Earth,Moon,0.0549,2.66170e-6,7.3477e25,5.972e27,1.7374e8,"
        "3.8440e10,0.02,0.4,30,0.04";
    {
        std::istringstream in("# comment only\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);
    }
    {
        std::istringstream in("wrong,header\n" + row + "\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);
    }
    {
        std::istringstream in(header + "\ne-m,Earth,Moon,0.0549\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);
    }
    {
        std::istringstream in(header + "\n" + row + "\n" + row + "\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);  // duplicate
    }
    {
        std::string bad = row;
        bad.replace(bad.find("0.0549"), 6, "0.9000");  // eccentricity range
        std::istringstream in(header + "\n" + bad + "\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);
    }
    {
        std::string bad = row;
        bad.replace(bad.find("7.3477e25"), 9, "mass");
        std::istringstream in(header + "\n" + bad + "\n");
        CHECK_THROWS_AS(load_satellites(in), std::runtime_error);
    }
    {
        std::istringstream in(header + "\n# trailing comment\n\n" + row + "\n");
        const auto rows = load_satellites(in);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].Q == doctest::Approx(30.0).epsilon(1e-15));
    }
    CHECK_THROWS_AS(load_satellites_file("/nonexistent/sat.csv"),
                    std::runtime_error);
}
