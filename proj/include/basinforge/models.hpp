#pragma once

#include <array>
#include <variant>

namespace basinforge {

// One trajectory sample. For the rotational model q is the unreduced angle,
// so winding counts can be read off q directly; for the oscillator it is
// position. t is absolute time.
struct PhaseState {
    double q = 0.0;
    double v = 0.0;
    double t = 0.0;
};

bool state_finite(const PhaseState& s);

// Damping schedules. gamma0 is the plateau value. Ramped schedules are
// parameterized by the dimensionless delta = gamma0 * T0, with T0 the ramp
// time (linear) or the ramp time constant (exponential). delta = 0 degenerates
// to the constant schedule for both ramps.
struct Constant {
    double gamma0 = 0.0;
};

// gamma(t) = gamma0 * t / T0 for t < T0, then gamma0.
struct LinearRamp {
    double gamma0 = 0.0;
    double delta = 0.0;
};

// gamma(t) = gamma0 * (1 - exp(-t / T0)).
struct ExpRamp {
    double gamma0 = 0.0;
    double delta = 0.0;
};

using DampingSchedule = std::variant<Constant, LinearRamp, ExpRamp>;

double gamma0_of(const DampingSchedule& s);
// T0 (ramp duration or time constant); 0 for Constant and for delta = 0.
double ramp_end(const DampingSchedule& s);
double damping_at(const DampingSchedule& s, double t);
// Exact integral of damping_at over [t0, t1], t0 <= t1.
double damping_integral(const DampingSchedule& s, double t0, double t1);
// Throws std::invalid_argument on gamma0 < 0, delta < 0, or non-finite values.
void validate(const DampingSchedule& s);

// Oscillator: x'' + (1 + eps cos t) x^3 + gamma(t) x' = 0.
struct CubicParams {
    double eps = 0.0;  // forcing amplitude, 0 <= eps < 1
    DampingSchedule damping = Constant{0.0};
};

// Modes carried by the rotational model's forcing expansion.
inline constexpr std::array<int, 10> kFourierModes{-3, -2, -1, 1, 2, 3, 4, 5, 6, 7};

// a_k(e): polynomial coefficient of sin(2 theta - k t) in the expansion of the
// tidal torque, truncated at e^5. k must be one of kFourierModes or 0..7.
double fourier_coefficient(int k, double e);

// Rotational model: theta'' = 2 eps sum_k a_k(e) sin(2 theta - k t)
//                             - gamma(t) (theta' - 1).
// ak caches fourier_coefficient(k, e) in kFourierModes order.
struct SpinOrbitParams {
    double e = 0.0;    // orbital eccentricity, 0 <= e <= 0.5
    double eps = 0.0;  // asphericity strength, eps > 0
    DampingSchedule damping = Constant{0.0};
    std::array<double, 10> ak{};
};

SpinOrbitParams make_spin_orbit(double e, double eps, const DampingSchedule& damping);

void validate(const CubicParams& p);
void validate(const SpinOrbitParams& p);

using Model = std::variant<CubicParams, SpinOrbitParams>;

void validate(const Model& m);
const DampingSchedule& damping_of(const Model& m);
bool is_cubic(const Model& m);

void cubic_rhs(const CubicParams& p, double t, double q, double v,
               double& dq, double& dv);
void spin_orbit_rhs(const SpinOrbitParams& p, double t, double q, double v,
                    double& dq, double& dv);
void model_rhs(const Model& m, double t, double q, double v,
               double& dq, double& dv);

// d(dv)/dq at (t, q): the only nontrivial entry of the flow Jacobian.
double cubic_dvdq(const CubicParams& p, double t, double q);
double spin_orbit_dvdq(const SpinOrbitParams& p, double t, double q);
double model_dvdq(const Model& m, double t, double q);

// First integral of the unforced, undamped oscillator: v^2/2 + q^4/4.
double energy_I(const PhaseState& s);

// Damping above which the oscillator origin attracts everything:
// max_t [eps sin t / (2 (1 + eps cos t))] = eps / (2 sqrt(1 - eps^2)).
double global_attraction_bound(double eps);

}  // namespace basinforge
