#pragma once

#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "basinforge/classify.hpp"
#include "basinforge/integrate.hpp"
#include "basinforge/models.hpp"

namespace basinforge {

// ---------------------------------------------------------------------------
// Elliptic functions (arithmetic-geometric mean / Landen descent).
// Modulus convention: k is the modulus itself, K(k) = F(pi/2, k).

double elliptic_K(double k);

struct JacobiValues {
    double sn = 0.0;
    double cn = 1.0;
    double dn = 1.0;
};

JacobiValues jacobi_elliptic(double u, double k);

// The undamped, undriven oscillator has orbits x(t) = A cn(A t; 1/sqrt 2)
// with frequency omega = pi A / (2 K(1/sqrt 2)). orbit_amplitude inverts
// that relation; oscillator_orbit_point evaluates position and velocity.
double orbit_amplitude(double omega);
PhaseState oscillator_orbit_point(double omega, double t);

// ---------------------------------------------------------------------------
// Capture thresholds.

// Rotational model, resonance p:q in lowest terms. The p:q cycle survives
// constant damping gamma up to roughly coefficient * eps. Returns +inf for
// p == q (synchronous lock persists at any first-order damping) and 0 for
// resonances whose mode 2p/q is not carried by the torque expansion.
double spin_orbit_threshold_coefficient(int p, int q, double e);

// Oscillator thresholds gamma_thr ~= coefficient * eps^order, tabulated
// from the first two orders of the resonant perturbation expansion.
struct CubicThresholdRef {
    int p = 0;
    int q = 0;
    int order = 0;
    double coefficient = 0.0;
};

const std::vector<CubicThresholdRef>& cubic_threshold_table();
std::optional<CubicThresholdRef> cubic_threshold_reference(int p, int q);

// First-order strobe angles of the two p:q cycle candidates of the
// rotational model at damping-to-forcing ratio C = gamma / eps, both in
// [0, pi). nullopt when no cycle can balance the torque (|C| beyond the
// threshold coefficient, or an uncarried resonance).
struct ThetaPair {
    double lower = 0.0;
    double upper = 0.0;
};

std::optional<ThetaPair> spin_orbit_cycle_angles(int p, int q, double e,
                                                 double C);

// ---------------------------------------------------------------------------
// Periodic orbits of the strobe map.

struct PeriodicOrbit {
    PhaseState point;  // cycle point; the map runs over [point.t, point.t+T]
    int p = 0;
    int q = 1;
    double residual = 0.0;  // max-norm period-map defect at the solution
    int iterations = 0;
};

// Newton iteration on the 2 pi q map from `guess`. Rotational orbits must
// advance by 2 pi p per cycle; oscillator orbits must wind p times and stay
// clear of the origin. nullopt if the iteration diverges, stalls on a
// singular Jacobian, or lands on the wrong resonance.
std::optional<PeriodicOrbit> find_periodic_orbit(
    const Model& m, int p, int q, const PhaseState& guess,
    const IntegratorConfig& cfg, double tol = 1e-10, int max_iter = 30);

// ---------------------------------------------------------------------------
// Linear stability of a periodic orbit.

struct StabilityInfo {
    double w[2][2] = {{1.0, 0.0}, {0.0, 1.0}};  // monodromy matrix
    double det = 1.0;
    double trace = 2.0;
    bool complex_pair = false;  // multipliers form a conjugate pair
    double mult_mod[2] = {1.0, 1.0};  // multiplier moduli, descending
    double lyapunov[2] = {0.0, 0.0};  // log |multiplier| / period
    double period = 0.0;
};

StabilityInfo orbit_stability(const Model& m, const PeriodicOrbit& orbit,
                              const IntegratorConfig& cfg);

// ---------------------------------------------------------------------------
// Empirical thresholds: bisection on constant damping over orbit existence.

struct ThresholdBracket {
    double lo = 0.0;  // orbit must exist here
    double hi = 0.0;  // and be gone here
};

struct ThresholdEstimate {
    double gamma_lo = 0.0;
    double gamma_hi = 0.0;
    int bisections = 0;
    double value() const { return 0.5 * (gamma_lo + gamma_hi); }
};

// model_at(gamma) builds the model under test; seeds(gamma) supplies Newton
// guesses, tried in order after continuation from the surviving orbit.
// nullopt if the bracket does not straddle the threshold.
std::optional<ThresholdEstimate> empirical_threshold(
    const std::function<Model(double)>& model_at,
    const std::function<std::vector<PhaseState>(double)>& seeds, int p, int q,
    const IntegratorConfig& cfg, ThresholdBracket bracket,
    double rel_width = 1e-3);

std::optional<ThresholdEstimate> cubic_empirical_threshold(
    double eps, int p, int q, const IntegratorConfig& cfg,
    ThresholdBracket bracket, double rel_width = 1e-3);

std::optional<ThresholdEstimate> spin_orbit_empirical_threshold(
    double e, double eps, int p, int q, const IntegratorConfig& cfg,
    ThresholdBracket bracket, double rel_width = 1e-3);

// ---------------------------------------------------------------------------
// Satellite catalogue. CGS units throughout; omega_T in rad/s.

struct SatelliteData {
    std::string pair;       // short tag, e.g. "e-m"
    std::string primary;    // central body name
    std::string satellite;  // satellite name
    double e = 0.0;         // orbital eccentricity
    double omega_T = 0.0;   // mean orbital frequency, rad/s
    double M = 0.0;         // satellite mass, g
    double M0 = 0.0;        // primary mass, g
    double R = 0.0;         // satellite mean radius, cm
    double rho = 0.0;       // mean orbital distance, cm
    double k2 = 0.0;        // tidal Love number
    double xi = 0.0;        // moment of inertia factor C / (M R^2)
    double Q = 0.0;         // tidal quality factor
    double h2 = 0.0;        // permanent-figure asymmetry factor
};

// Dimensionless model parameters in orbital-phase time.
struct SatelliteDerived {
    double X = 0.0;               // (R / rho)^3 * (M0 / M)
    double eps = 0.0;             // 2.25 * h2 * X
    double gamma = 0.0;           // 3 k2 / (xi Q) * X
    double gamma_per_year = 0.0;  // gamma * omega_T, per Julian year
};

inline constexpr double kSecondsPerYear = 3.15576e7;

SatelliteDerived derive_parameters(const SatelliteData& d);

void validate(const SatelliteData& d);

// CSV rows pair,primary,satellite,e,omega_T,M,M0,R,rho,k2,xi,Q,h2 after a
// mandatory header; '#' lines and blank lines skip. Throws on malformed
// input with the offending line number.
std::vector<SatelliteData> load_satellites(std::istream& in);
std::vector<SatelliteData> load_satellites_file(const std::string& path);

}  // namespace basinforge
