#pragma once

#include "basinforge/models.hpp"

#include <stdexcept>
#include <vector>

namespace basinforge {

enum class Method { TaylorSeries, AdaptiveRK };

struct IntegratorConfig {
    Method method = Method::TaylorSeries;
    // TaylorSeries: bound on the defect of the truncated series at the step
    // endpoint. AdaptiveRK: absolute and relative tolerance.
    double tol = 1e-12;
    int series_order = 25;
    double max_step = 10.0;
    double min_step = 1e-6;
};

// TaylorSeries for the oscillator, AdaptiveRK for the rotational model
// (its forcing has no cheap series expansion).
IntegratorConfig default_config(const Model& m);

enum class IntegrationFailure { StepUnderflow, NonFinite };

class IntegrationError : public std::runtime_error {
  public:
    IntegrationError(IntegrationFailure kind, double t);
    IntegrationFailure kind() const { return kind_; }
    double at_time() const { return t_; }

  private:
    IntegrationFailure kind_;
    double t_;
};

// Taylor coefficients of the oscillator solution about s.t:
//   q(s.t + h) = sum_j q[j] h^j,   v likewise,   j = 0 .. order.
// Built by the standard power-series recurrence: q[j+1] = v[j]/(j+1) and
// v[j+1] = -((c * q^3)[j] + (g * v)[j]) / (j+1), with the cubes accumulated
// as Cauchy products and c, g the series of the forcing factor and the
// damping schedule about s.t. The damping series assumes the step does not
// cross the linear-ramp knee; the driver clips steps there.
struct SeriesCoefficients {
    std::vector<double> q, v;
};
SeriesCoefficients taylor_recurrence(const CubicParams& p, const PhaseState& s,
                                     int order);

double evaluate_series(const std::vector<double>& c, double h);

// Defect of the truncated series at offset h from s.t:
//   |v'(h) + (1 + eps cos(s.t + h)) q(h)^3 + gamma(s.t + h) v(h)|.
double series_residual(const CubicParams& p, const PhaseState& s,
                       const SeriesCoefficients& sc, double h);

// One accepted step. h_init seeds the trial ladder (grow/shrink by 1.3x from
// the previous accepted size); the step is clipped to t_limit. h_ladder is
// the accepted unclipped ladder value, to seed the next step.
struct TaylorStep {
    PhaseState state;
    double h_accepted = 0.0;
    double h_ladder = 0.0;
};
TaylorStep taylor_step(const CubicParams& p, const PhaseState& s,
                       const IntegratorConfig& cfg, double h_init,
                       double t_limit);

// Advance from one state to t_end (either direction), landing on t_end
// exactly. Throws IntegrationError; throws std::invalid_argument on bad
// parameters or a TaylorSeries request for the rotational model.
PhaseState integrate_to(const Model& m, const PhaseState& from, double t_end,
                        const IntegratorConfig& cfg);

// Dense states at the requested times, which must be non-decreasing and
// >= from.t. One integration pass; cheaper than repeated integrate_to.
std::vector<PhaseState> integrate_path(const Model& m, const PhaseState& from,
                                       const std::vector<double>& times,
                                       const IntegratorConfig& cfg);

// Tangent-map propagation: w solves the variational equations along the
// trajectory with w(from.t) = w0 (rows index output, columns input).
// Always integrated with AdaptiveRK on the combined 6-dimensional system.
struct VariationalResult {
    PhaseState state;
    double w[2][2];
};
VariationalResult integrate_variational(const Model& m, const PhaseState& from,
                                        double t_end, const double w0[2][2],
                                        const IntegratorConfig& cfg);

}  // namespace basinforge
