#include "basinforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace basinforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

// The AGM gap stalls around one ulp; a relative floor plus an iteration cap
// terminates where an exact-zero test would spin.
constexpr double kAgmRelTol = 1e-15;
constexpr int kAgmMaxIter = 40;

void check_modulus(double k) {
    require(std::isfinite(k) && k >= 0.0 && k < 1.0,
            "elliptic: modulus must lie in [0, 1)");
}

// Lowest-terms check shared by the resonance-facing entry points.
void check_resonance(int p, int q) {
    require(q >= 1, "resonance: q must be >= 1");
    require(std::gcd(std::abs(p), q) == 1, "resonance: p:q not in lowest terms");
}

// cn modulus of the quartic-potential orbits.
const double kOrbitModulus = std::sqrt(0.5);

}  // namespace

double elliptic_K(double k) {
    check_modulus(k);
    double a = 1.0;
    double b = std::sqrt((1.0 - k) * (1.0 + k));
    for (int i = 0; i < kAgmMaxIter && std::abs(a - b) > kAgmRelTol * a; ++i) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return M_PI / (2.0 * a);
}

JacobiValues jacobi_elliptic(double u, double k) {
    check_modulus(k);
    require(std::isfinite(u), "elliptic: argument must be finite");
    if (k < 1e-12) return {std::sin(u), std::cos(u), 1.0};

    // Descending Landen transformation, then the ascending phase recursion.
    double a[kAgmMaxIter + 1];
    double c[kAgmMaxIter + 1];
    a[0] = 1.0;
    c[0] = k;
    double b = std::sqrt((1.0 - k) * (1.0 + k));
    int n = 0;
    while (n < kAgmMaxIter && std::abs(c[n]) > kAgmRelTol * a[n]) {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = std::sqrt(a[n] * b);
        ++n;
    }
    const double quarter_k = M_PI / (2.0 * a[n]);
    // sn and cn repeat every 4K; reducing first keeps the doubled phase small.
    const double ur = std::remainder(u, 4.0 * quarter_k);

    double phi = std::ldexp(a[n] * ur, n);
    for (int i = n; i >= 1; --i) {
        const double s = std::clamp(c[i] / a[i] * std::sin(phi), -1.0, 1.0);
        phi = 0.5 * (phi + std::asin(s));
    }
    JacobiValues jv;
    jv.sn = std::sin(phi);
    jv.cn = std::cos(phi);
    jv.dn = std::sqrt(1.0 - k * k * jv.sn * jv.sn);
    return jv;
}

double orbit_amplitude(double omega) {
    require(std::isfinite(omega) && omega > 0.0,
            "orbit_amplitude: omega must be > 0");
    static const double kQuarter = elliptic_K(kOrbitModulus);
    return 2.0 * omega * kQuarter / M_PI;
}

PhaseState oscillator_orbit_point(double omega, double t) {
    const double alpha = orbit_amplitude(omega);
    const auto jv = jacobi_elliptic(alpha * t, kOrbitModulus);
    return {alpha * jv.cn, -alpha * alpha * jv.sn * jv.dn, t};
}

double spin_orbit_threshold_coefficient(int p, int q, double e) {
    check_resonance(p, q);
    if (p == q) return kInf;
    if ((2 * p) % q != 0) return 0.0;
    const int k = 2 * p / q;
    if (k == 0 || k < -3 || k > 7) return 0.0;
    return 2.0 * q * std::abs(fourier_coefficient(k, e)) /
           std::abs(static_cast<double>(p - q));
}

const std::vector<CubicThresholdRef>& cubic_threshold_table() {
    static const std::vector<CubicThresholdRef> table = {
        {1, 2, 1, 0.178442},  {1, 4, 1, 0.061574}, {1, 6, 1, 0.008980},
        {1, 8, 1, 0.000920},  {1, 10, 1, 0.000078},
        {1, 1, 2, 0.146322},  {1, 3, 2, 0.065001}, {1, 5, 2, 0.006488},
        {1, 7, 2, 0.000177},  {1, 9, 2, 0.000002},
    };
    return table;
}

std::optional<CubicThresholdRef> cubic_threshold_reference(int p, int q) {
    for (const auto& row : cubic_threshold_table())
        if (row.p == p && row.q == q) return row;
    return std::nullopt;
}

std::optional<ThetaPair> spin_orbit_cycle_angles(int p, int q, double e,
                                                 double C) {
    check_resonance(p, q);
    require(std::isfinite(C), "cycle angles: C must be finite");
    if (p == q) return ThetaPair{0.0, M_PI / 2.0};
    if ((2 * p) % q != 0) return std::nullopt;
    const int k = 2 * p / q;
    if (k == 0 || k < -3 || k > 7) return std::nullopt;

    // First order: the cycle angle balances the averaged torque against the
    // drag on the off-resonant drift, sin(2 theta0) = C (p/q - 1) / (2 a_k).
    const double ak = fourier_coefficient(k, e);
    if (ak == 0.0) return std::nullopt;
    const double s = C * (static_cast<double>(p) / q - 1.0) / (2.0 * ak);
    if (std::abs(s) > 1.0) return std::nullopt;
    const double x = std::asin(s);
    const double th1 = 0.5 * (M_PI - x);
    const double th2 = (x >= 0.0) ? 0.5 * x : M_PI + 0.5 * x;
    return ThetaPair{std::min(th1, th2), std::max(th1, th2)};
}

std::optional<PeriodicOrbit> find_periodic_orbit(const Model& m, int p, int q,
                                                 const PhaseState& guess,
                                                 const IntegratorConfig& cfg,
                                                 double tol, int max_iter) {
    validate(m);
    check_resonance(p, q);
    require(std::isfinite(tol) && tol > 0.0, "find_periodic_orbit: bad tol");
    require(max_iter >= 1, "find_periodic_orbit: max_iter must be >= 1");
    if (!state_finite(guess)) return std::nullopt;
    const bool cubic = is_cubic(m);
    if (cubic) require(p >= 1, "find_periodic_orbit: oscillator needs p >= 1");

    const double T = kTwoPi * q;
    const double shift = cubic ? 0.0 : kTwoPi * p;
    const double identity[2][2] = {{1.0, 0.0}, {0.0, 1.0}};

    PhaseState y = guess;
    for (int corrections = 0;; ++corrections) {
        VariationalResult vr;
        try {
            vr = integrate_variational(m, y, y.t + T, identity, cfg);
        } catch (const IntegrationError&) {
            return std::nullopt;
        }
        const double f0 = vr.state.q - y.q - shift;
        const double f1 = vr.state.v - y.v;
        const double resid = std::max(std::abs(f0), std::abs(f1));
        if (resid <= tol) {
            if (cubic) {
                // Reject collapse onto the trivial fixed point and cycles of
                // the wrong winding; both satisfy the same map equation.
                if (energy_I(y) < 1e-6) return std::nullopt;
                if (count_oscillations(m, y, q, cfg) != p) return std::nullopt;
            }
            PeriodicOrbit orbit;
            orbit.point = y;
            orbit.p = p;
            orbit.q = q;
            orbit.residual = resid;
            orbit.iterations = corrections;
            return orbit;
        }
        if (corrections == max_iter) return std::nullopt;

        const double j00 = vr.w[0][0] - 1.0;
        const double j01 = vr.w[0][1];
        const double j10 = vr.w[1][0];
        const double j11 = vr.w[1][1] - 1.0;
        const double det = j00 * j11 - j01 * j10;
        if (!std::isfinite(det) || std::abs(det) < 1e-13) return std::nullopt;
        const double d0 = (-j11 * f0 + j01 * f1) / det;
        const double d1 = (j10 * f0 - j00 * f1) / det;
        y.q += d0;
        y.v += d1;
        if (!state_finite(y)) return std::nullopt;
        if (std::max(std::abs(d0), std::abs(d1)) > 50.0) return std::nullopt;
    }
}

StabilityInfo orbit_stability(const Model& m, const PeriodicOrbit& orbit,
                              const IntegratorConfig& cfg) {
    validate(m);
    require(orbit.q >= 1, "orbit_stability: q must be >= 1");
    const double T = kTwoPi * orbit.q;
    const double identity[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    const auto vr =
        integrate_variational(m, orbit.point, orbit.point.t + T, identity, cfg);

    StabilityInfo info;
    for (int r = 0; r < 2; ++r)
        for (int col = 0; col < 2; ++col) info.w[r][col] = vr.w[r][col];
    info.det = vr.w[0][0] * vr.w[1][1] - vr.w[0][1] * vr.w[1][0];
    info.trace = vr.w[0][0] + vr.w[1][1];
    info.period = T;

    const double disc = info.trace * info.trace - 4.0 * info.det;
    if (disc < 0.0) {
        // det > 0 whenever the discriminant is negative.
        info.complex_pair = true;
        const double mod = std::sqrt(info.det);
        info.mult_mod[0] = info.mult_mod[1] = mod;
        info.lyapunov[0] = info.lyapunov[1] = std::log(info.det) / (2.0 * T);
    } else {
        info.complex_pair = false;
        const double root = std::sqrt(disc);
        double m0 = std::abs(0.5 * (info.trace + root));
        double m1 = std::abs(0.5 * (info.trace - root));
        if (m0 < m1) std::swap(m0, m1);
        info.mult_mod[0] = m0;
        info.mult_mod[1] = m1;
        info.lyapunov[0] = std::log(m0) / T;
        info.lyapunov[1] = std::log(m1) / T;
    }
    return info;
}

namespace {

std::optional<PeriodicOrbit> first_orbit(
    const std::function<Model(double)>& model_at,
    const std::function<std::vector<PhaseState>(double)>& seeds, int p, int q,
    const IntegratorConfig& cfg, double gamma,
    const std::optional<PhaseState>& hint) {
    const Model m = model_at(gamma);
    if (hint) {
        if (auto orbit = find_periodic_orbit(m, p, q, *hint, cfg)) return orbit;
    }
    for (const auto& seed : seeds(gamma)) {
        if (auto orbit = find_periodic_orbit(m, p, q, seed, cfg)) return orbit;
    }
    return std::nullopt;
}

}  // namespace

std::optional<ThresholdEstimate> empirical_threshold(
    const std::function<Model(double)>& model_at,
    const std::function<std::vector<PhaseState>(double)>& seeds, int p, int q,
    const IntegratorConfig& cfg, ThresholdBracket bracket, double rel_width) {
    require(std::isfinite(bracket.lo) && std::isfinite(bracket.hi) &&
                bracket.lo > 0.0 && bracket.hi > bracket.lo,
            "empirical_threshold: need 0 < lo < hi");
    require(std::isfinite(rel_width) && rel_width > 0.0,
            "empirical_threshold: rel_width must be > 0");

    auto lo_orbit =
        first_orbit(model_at, seeds, p, q, cfg, bracket.lo, std::nullopt);
    if (!lo_orbit) return std::nullopt;
    if (first_orbit(model_at, seeds, p, q, cfg, bracket.hi, lo_orbit->point))
        return std::nullopt;

    double lo = bracket.lo;
    double hi = bracket.hi;
    int count = 0;
    while (hi - lo > rel_width * lo && count < 200) {
        const double mid = 0.5 * (lo + hi);
        if (auto orbit =
                first_orbit(model_at, seeds, p, q, cfg, mid, lo_orbit->point)) {
            lo = mid;
            lo_orbit = orbit;
        } else {
            hi = mid;
        }
        ++count;
    }
    ThresholdEstimate est;
    est.gamma_lo = lo;
    est.gamma_hi = hi;
    est.bisections = count;
    return est;
}

std::optional<ThresholdEstimate> cubic_empirical_threshold(
    double eps, int p, int q, const IntegratorConfig& cfg,
    ThresholdBracket bracket, double rel_width) {
    require(p >= 1, "cubic threshold: p must be >= 1");
    auto model_at = [eps](double gamma) {
        return Model{CubicParams{eps, Constant{gamma}}};
    };
    const double omega = static_cast<double>(p) / q;
    auto seeds = [omega, q](double) {
        std::vector<PhaseState> out;
        const double orbit_period = kTwoPi * q;  // one strobe window
        for (int j = 0; j < 8; ++j) {
            PhaseState s = oscillator_orbit_point(omega, orbit_period * j / 8.0);
            s.t = 0.0;
            out.push_back(s);
        }
        return out;
    };
    return empirical_threshold(model_at, seeds, p, q, cfg, bracket, rel_width);
}

std::optional<ThresholdEstimate> spin_orbit_empirical_threshold(
    double e, double eps, int p, int q, const IntegratorConfig& cfg,
    ThresholdBracket bracket, double rel_width) {
    auto model_at = [e, eps](double gamma) {
        return Model{make_spin_orbit(e, eps, Constant{gamma})};
    };
    const double v = static_cast<double>(p) / q;
    auto seeds = [p, q, e, eps, v](double gamma) {
        std::vector<PhaseState> out;
        if (auto angles = spin_orbit_cycle_angles(p, q, e, gamma / eps)) {
            out.push_back({angles->upper, v, 0.0});
            out.push_back({angles->lower, v, 0.0});
        }
        return out;
    };
    return empirical_threshold(model_at, seeds, p, q, cfg, bracket, rel_width);
}

SatelliteDerived derive_parameters(const SatelliteData& d) {
    validate(d);
    SatelliteDerived out;
    const double ratio = d.R / d.rho;
    out.X = ratio * ratio * ratio * (d.M0 / d.M);
    out.eps = 2.25 * d.h2 * out.X;
    out.gamma = 3.0 * d.k2 / (d.xi * d.Q) * out.X;
    out.gamma_per_year = out.gamma * d.omega_T * kSecondsPerYear;
    return out;
}

void validate(const SatelliteData& d) {
    require(!d.pair.empty(), "satellite: empty pair tag");
    require(std::isfinite(d.e) && d.e >= 0.0 && d.e <= 0.5,
            "satellite: eccentricity out of range");
    const double positives[] = {d.omega_T, d.M, d.M0, d.R, d.rho,
                                d.k2,      d.xi, d.Q, d.h2};
    for (double x : positives)
        require(std::isfinite(x) && x > 0.0,
                "satellite: physical parameters must be positive");
    require(d.R < d.rho, "satellite: radius must be below orbital distance");
}

namespace {

constexpr const char* kCsvHeader =
    "pair,primary,satellite,e,omega_T,M,M0,R,rho,k2,xi,Q,h2";

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void csv_fail(int line, const std::string& what) {
    throw std::runtime_error("satellites csv line " + std::to_string(line) +
                             ": " + what);
}

double csv_number(const std::string& field, int line) {
    try {
        size_t pos = 0;
        const double x = std::stod(field, &pos);
        if (pos != field.size()) csv_fail(line, "trailing junk in '" + field + "'");
        return x;
    } catch (const std::logic_error&) {
        csv_fail(line, "not a number: '" + field + "'");
    }
}

}  // namespace

std::vector<SatelliteData> load_satellites(std::istream& in) {
    std::vector<SatelliteData> out;
    std::set<std::string> seen;
    std::string line;
    bool header_done = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = trimmed(line);
        if (body.empty() || body[0] == '#') continue;
        if (!header_done) {
            if (body != kCsvHeader) csv_fail(lineno, "unexpected header");
            header_done = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(body);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(trimmed(field));
        if (fields.size() != 13) csv_fail(lineno, "expected 13 fields");

        SatelliteData d;
        d.pair = fields[0];
        d.primary = fields[1];
        d.satellite = fields[2];
        d.e = csv_number(fields[3], lineno);
        d.omega_T = csv_number(fields[4], lineno);
        d.M = csv_number(fields[5], lineno);
        d.M0 = csv_number(fields[6], lineno);
        d.R = csv_number(fields[7], lineno);
        d.rho = csv_number(fields[8], lineno);
        d.k2 = csv_number(fields[9], lineno);
        d.xi = csv_number(fields[10], lineno);
        d.Q = csv_number(fields[11], lineno);
        d.h2 = csv_number(fields[12], lineno);
        try {
            validate(d);
        } catch (const std::invalid_argument& err) {
            csv_fail(lineno, err.what());
        }
        if (!seen.insert(d.pair).second) csv_fail(lineno, "duplicate pair tag");
        out.push_back(std::move(d));
    }
    if (!header_done) throw std::runtime_error("satellites csv: empty input");
    return out;
}

std::vector<SatelliteData> load_satellites_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open satellites csv: " + path);
    return load_satellites(in);
}

}  // namespace basinforge
