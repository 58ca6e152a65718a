#include "basinforge/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace basinforge {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

bool state_finite(const PhaseState& s) {
    return std::isfinite(s.q) && std::isfinite(s.v) && std::isfinite(s.t);
}

double gamma0_of(const DampingSchedule& s) {
    return std::visit([](const auto& x) { return x.gamma0; }, s);
}

double ramp_end(const DampingSchedule& s) {
    return std::visit(
        [](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return 0.0;
            } else {
                return x.delta > 0.0 ? x.delta / x.gamma0 : 0.0;
            }
        },
        s);
}

double damping_at(const DampingSchedule& s, double t) {
    return std::visit(
        [t](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return x.gamma0;
            } else if constexpr (std::is_same_v<T, LinearRamp>) {
                if (x.delta <= 0.0) return x.gamma0;
                const double T0 = x.delta / x.gamma0;
                return t >= T0 ? x.gamma0 : x.gamma0 * (t / T0);
            } else {
                if (x.delta <= 0.0) return x.gamma0;
                const double T0 = x.delta / x.gamma0;
                return x.gamma0 * (-std::expm1(-t / T0));
            }
        },
        s);
}

double damping_integral(const DampingSchedule& s, double t0, double t1) {
    require(t1 >= t0, "damping_integral: t1 < t0");
    return std::visit(
        [t0, t1](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return x.gamma0 * (t1 - t0);
            } else if constexpr (std::is_same_v<T, LinearRamp>) {
                if (x.delta <= 0.0) return x.gamma0 * (t1 - t0);
                const double T0 = x.delta / x.gamma0;
                // Antiderivative: gamma0 t^2 / (2 T0) on the ramp, then linear.
                auto anti = [&](double t) {
                    if (t <= T0) return x.gamma0 * t * t / (2.0 * T0);
                    return x.gamma0 * (T0 / 2.0 + (t - T0));
                };
                return anti(t1) - anti(t0);
            } else {
                if (x.delta <= 0.0) return x.gamma0 * (t1 - t0);
                const double T0 = x.delta / x.gamma0;
                auto anti = [&](double t) {
                    return x.gamma0 * (t + T0 * std::exp(-t / T0));
                };
                return anti(t1) - anti(t0);
            }
        },
        s);
}

void validate(const DampingSchedule& s) {
    std::visit(
        [](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            require(std::isfinite(x.gamma0) && x.gamma0 >= 0.0,
                    "damping: gamma0 must be finite and >= 0");
            if constexpr (!std::is_same_v<T, Constant>) {
                require(std::isfinite(x.delta) && x.delta >= 0.0,
                        "damping: delta must be finite and >= 0");
                if (x.delta > 0.0)
                    require(x.gamma0 > 0.0, "damping: ramp needs gamma0 > 0");
            }
        },
        s);
}

double fourier_coefficient(int k, double e) {
    require(std::isfinite(e) && e >= 0.0 && e <= 0.5,
            "fourier_coefficient: e out of [0, 0.5]");
    const double e2 = e * e;
    const double e3 = e2 * e;
    const double e4 = e2 * e2;
    const double e5 = e4 * e;
    switch (k) {
        case -3: return -81.0 / 2560.0 * e5;
        case -2: return e4 / 48.0;
        case -1: return e3 / 96.0 + 11.0 / 1536.0 * e5;
        case 0:  return 0.0;
        case 1:  return -e / 4.0 + e3 / 32.0 - 5.0 / 768.0 * e5;
        case 2:  return 0.5 - 2.5 * e2 + 13.0 / 16.0 * e4;
        case 3:  return 7.0 / 4.0 * e - 123.0 / 32.0 * e3 + 489.0 / 256.0 * e5;
        case 4:  return 17.0 / 4.0 * e2 - 115.0 / 12.0 * e4;
        case 5:  return 845.0 / 96.0 * e3 - 32525.0 / 1536.0 * e5;
        case 6:  return 533.0 / 32.0 * e4;
        case 7:  return 228347.0 / 7680.0 * e5;
        default:
            throw std::invalid_argument("fourier_coefficient: k out of range");
    }
}

SpinOrbitParams make_spin_orbit(double e, double eps, const DampingSchedule& damping) {
    SpinOrbitParams p;
    p.e = e;
    p.eps = eps;
    p.damping = damping;
    for (std::size_t i = 0; i < kFourierModes.size(); ++i)
        p.ak[i] = fourier_coefficient(kFourierModes[i], e);
    validate(p);
    return p;
}

void validate(const CubicParams& p) {
    require(std::isfinite(p.eps) && p.eps >= 0.0 && p.eps < 1.0,
            "cubic: eps must be in [0, 1)");
    validate(p.damping);
}

void validate(const SpinOrbitParams& p) {
    require(std::isfinite(p.e) && p.e >= 0.0 && p.e <= 0.5,
            "spin-orbit: e must be in [0, 0.5]");
    require(std::isfinite(p.eps) && p.eps > 0.0, "spin-orbit: eps must be > 0");
    validate(p.damping);
    for (std::size_t i = 0; i < kFourierModes.size(); ++i)
        require(p.ak[i] == fourier_coefficient(kFourierModes[i], p.e),
                "spin-orbit: ak table inconsistent with e");
}

void validate(const Model& m) {
    std::visit([](const auto& p) { validate(p); }, m);
}

const DampingSchedule& damping_of(const Model& m) {
    return std::visit([](const auto& p) -> const DampingSchedule& { return p.damping; }, m);
}

bool is_cubic(const Model& m) {
    return std::holds_alternative<CubicParams>(m);
}

void cubic_rhs(const CubicParams& p, double t, double q, double v,
               double& dq, double& dv) {
    dq = v;
    dv = -(1.0 + p.eps * std::cos(t)) * q * q * q - damping_at(p.damping, t) * v;
}

namespace {

// Accumulates sum_k a_k f(2q - k t) for f = sin (torque) or f = cos (its
// q-derivative integrand) using the angle-addition recurrence for cos/sin(kt).
template <bool WantSin>
double mode_sum(const SpinOrbitParams& p, double t, double q) {
    const double s2 = std::sin(2.0 * q);
    const double c2 = std::cos(2.0 * q);
    const double ct = std::cos(t);
    const double st = std::sin(t);
    double ck = 1.0, sk = 0.0;  // cos(kt), sin(kt), k starting at 0
    double sum = 0.0;
    for (int k = 1; k <= 7; ++k) {
        const double cn = ck * ct - sk * st;
        const double sn = sk * ct + ck * st;
        ck = cn;
        sk = sn;
        // index in kFourierModes: negatives at k+3, positives at k+2
        if constexpr (WantSin) {
            sum += p.ak[k + 2] * (s2 * ck - c2 * sk);
            if (k <= 3) sum += p.ak[3 - k] * (s2 * ck + c2 * sk);
        } else {
            sum += p.ak[k + 2] * (c2 * ck + s2 * sk);
            if (k <= 3) sum += p.ak[3 - k] * (c2 * ck - s2 * sk);
        }
    }
    return sum;
}

}  // namespace

void spin_orbit_rhs(const SpinOrbitParams& p, double t, double q, double v,
                    double& dq, double& dv) {
    dq = v;
    dv = 2.0 * p.eps * mode_sum<true>(p, t, q) -
         damping_at(p.damping, t) * (v - 1.0);
}

void model_rhs(const Model& m, double t, double q, double v,
               double& dq, double& dv) {
    if (const auto* c = std::get_if<CubicParams>(&m)) {
        cubic_rhs(*c, t, q, v, dq, dv);
    } else {
        spin_orbit_rhs(std::get<SpinOrbitParams>(m), t, q, v, dq, dv);
    }
}

double cubic_dvdq(const CubicParams& p, double t, double q) {
    return -3.0 * (1.0 + p.eps * std::cos(t)) * q * q;
}

double spin_orbit_dvdq(const SpinOrbitParams& p, double t, double q) {
    return 4.0 * p.eps * mode_sum<false>(p, t, q);
}

double model_dvdq(const Model& m, double t, double q) {
    if (const auto* c = std::get_if<CubicParams>(&m)) return cubic_dvdq(*c, t, q);
    return spin_orbit_dvdq(std::get<SpinOrbitParams>(m), t, q);
}

double energy_I(const PhaseState& s) {
    return 0.5 * s.v * s.v + 0.25 * s.q * s.q * s.q * s.q;
}

double global_attraction_bound(double eps) {
    require(std::isfinite(eps) && eps >= 0.0 && eps < 1.0,
            "global_attraction_bound: eps must be in [0, 1)");
    return eps / (2.0 * std::sqrt(1.0 - eps * eps));
}

}  // namespace basinforge
