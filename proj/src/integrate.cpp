#include "basinforge/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace basinforge {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void validate_config(const IntegratorConfig& cfg) {
    require(std::isfinite(cfg.tol) && cfg.tol > 0.0, "integrator: tol must be > 0");
    require(cfg.series_order >= 2 && cfg.series_order <= 200,
            "integrator: series_order out of range");
    require(std::isfinite(cfg.max_step) && cfg.max_step > 0.0,
            "integrator: max_step must be > 0");
    require(std::isfinite(cfg.min_step) && cfg.min_step > 0.0 &&
                cfg.min_step <= cfg.max_step,
            "integrator: need 0 < min_step <= max_step");
}

}  // namespace

IntegratorConfig default_config(const Model& m) {
    IntegratorConfig cfg;
    cfg.method = is_cubic(m) ? Method::TaylorSeries : Method::AdaptiveRK;
    return cfg;
}

IntegrationError::IntegrationError(IntegrationFailure kind, double t)
    : std::runtime_error([&] {
          char buf[96];
          std::snprintf(buf, sizeof buf, "integration failed (%s) at t = %.6g",
                        kind == IntegrationFailure::StepUnderflow ? "step underflow"
                                                                  : "non-finite state",
                        t);
          return std::string(buf);
      }()),
      kind_(kind),
      t_(t) {}

namespace {

// dir selects the damping branch when s.t sits exactly on the linear-ramp
// knee: a backward step from there continues into the ramp.
SeriesCoefficients taylor_recurrence_dir(const CubicParams& p, const PhaseState& s,
                                         int order, double dir) {
    require(order >= 2, "taylor_recurrence: order must be >= 2");
    const int n = order;
    SeriesCoefficients sc;
    sc.q.assign(n + 1, 0.0);
    sc.v.assign(n + 1, 0.0);
    sc.q[0] = s.q;
    sc.v[0] = s.v;

    // Forcing series c[j]: c[0] = 1 + eps cos t0, then eps cos^(j)(t0) / j!.
    std::vector<double> c(n + 1, 0.0);
    {
        double cs = std::cos(s.t), sn = std::sin(s.t);
        c[0] = 1.0 + p.eps * cs;
        double inv_fact = 1.0;
        for (int j = 1; j <= n; ++j) {
            const double ncs = -sn, nsn = cs;  // rotate by pi/2
            cs = ncs;
            sn = nsn;
            inv_fact /= j;
            c[j] = p.eps * cs * inv_fact;
        }
    }

    // Damping series g[j] about s.t, valid on the schedule branch containing
    // the step (the driver never straddles the linear-ramp knee).
    std::vector<double> g(n + 1, 0.0);
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>) {
                g[0] = x.gamma0;
            } else if constexpr (std::is_same_v<T, LinearRamp>) {
                const double T0 = x.delta > 0.0 ? x.delta / x.gamma0 : 0.0;
                const bool on_ramp =
                    x.delta > 0.0 && (s.t < T0 || (s.t == T0 && dir < 0.0));
                if (!on_ramp) {
                    g[0] = x.gamma0;
                } else {
                    g[0] = x.gamma0 * (s.t / T0);
                    g[1] = x.gamma0 / T0;
                }
            } else {
                if (x.delta <= 0.0) {
                    g[0] = x.gamma0;
                } else {
                    const double T0 = x.delta / x.gamma0;
                    const double E = std::exp(-s.t / T0);
                    g[0] = x.gamma0 * (1.0 - E);
                    double term = -x.gamma0 * E;
                    for (int j = 1; j <= n; ++j) {
                        term *= -1.0 / (T0 * j);
                        g[j] = term;
                    }
                }
            }
        },
        p.damping);

    std::vector<double> q2(n + 1, 0.0), q3(n + 1, 0.0);
    for (int j = 0; j < n; ++j) {
        double s2 = 0.0;
        for (int i = 0; i <= j; ++i) s2 += sc.q[i] * sc.q[j - i];
        q2[j] = s2;
        double s3 = 0.0;
        for (int i = 0; i <= j; ++i) s3 += q2[i] * sc.q[j - i];
        q3[j] = s3;
        double acc = 0.0;
        for (int i = 0; i <= j; ++i) acc += c[i] * q3[j - i] + g[i] * sc.v[j - i];
        sc.q[j + 1] = sc.v[j] / (j + 1);
        sc.v[j + 1] = -acc / (j + 1);
    }
    return sc;
}

}  // namespace

SeriesCoefficients taylor_recurrence(const CubicParams& p, const PhaseState& s,
                                     int order) {
    return taylor_recurrence_dir(p, s, order, 1.0);
}

double evaluate_series(const std::vector<double>& c, double h) {
    double acc = 0.0;
    for (std::size_t j = c.size(); j-- > 0;) acc = acc * h + c[j];
    return acc;
}

double series_residual(const CubicParams& p, const PhaseState& s,
                       const SeriesCoefficients& sc, double h) {
    // v'(h) by Horner on the derivative coefficients.
    double vp = 0.0;
    for (std::size_t j = sc.v.size(); j-- > 1;) vp = vp * h + double(j) * sc.v[j];
    const double qe = evaluate_series(sc.q, h);
    const double ve = evaluate_series(sc.v, h);
    const double te = s.t + h;
    const double f = 1.0 + p.eps * std::cos(te);
    const double g = damping_at(p.damping, te);
    return std::abs(vp + f * qe * qe * qe + g * ve);
}

namespace {

TaylorStep taylor_step_core(const CubicParams& p, const PhaseState& s,
                            const IntegratorConfig& cfg, double h_init,
                            double t_limit, SeriesCoefficients* out_sc) {
    const double dist = t_limit - s.t;
    TaylorStep r;
    if (dist == 0.0) {
        r.state = s;
        r.h_ladder = h_init;
        if (out_sc) *out_sc = taylor_recurrence(p, s, cfg.series_order);
        return r;
    }
    const double dir = dist > 0.0 ? 1.0 : -1.0;
    const double hmax = std::min(cfg.max_step, std::abs(dist));
    auto sc = taylor_recurrence_dir(p, s, cfg.series_order, dir);

    // clipped: the step was limited by t_limit/max_step, not by the defect
    // bound, so the ladder seed must survive for the next step.
    double h;
    bool clipped = false;
    if (hmax <= cfg.min_step) {
        // Remainder below the smallest subdividable step: take it whole.
        h = hmax;
        clipped = true;
    } else {
        h = std::clamp(h_init, cfg.min_step, hmax);
        clipped = h_init > hmax;
        double res = series_residual(p, s, sc, dir * h);
        if (res <= cfg.tol) {
            while (h < hmax) {
                const double hn = std::min(h * 1.3, hmax);
                if (series_residual(p, s, sc, dir * hn) <= cfg.tol) {
                    if (hn == hmax) clipped = true;
                    h = hn;
                    if (hn == hmax) break;
                } else {
                    break;
                }
            }
        } else {
            clipped = false;
            for (;;) {
                h /= 1.3;
                if (h < cfg.min_step) {
                    throw IntegrationError(std::isfinite(res)
                                               ? IntegrationFailure::StepUnderflow
                                               : IntegrationFailure::NonFinite,
                                           s.t);
                }
                res = series_residual(p, s, sc, dir * h);
                if (res <= cfg.tol) break;
            }
        }
    }

    r.h_accepted = h;
    // Seed for the next step; external clipping must not shrink the ladder.
    r.h_ladder = clipped ? std::max(h, std::min(h_init, cfg.max_step)) : h;
    r.state.q = evaluate_series(sc.q, dir * h);
    r.state.v = evaluate_series(sc.v, dir * h);
    r.state.t = (h >= std::abs(dist)) ? t_limit : s.t + dir * h;
    if (!state_finite(r.state))
        throw IntegrationError(IntegrationFailure::NonFinite, s.t);
    if (out_sc) *out_sc = std::move(sc);
    return r;
}

// Dormand-Prince 5(4) tableau.
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                 kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

struct RkController {
    double h_abs = 0.0;     // proposed magnitude; 0 = not initialized
    double err_prev = 1.0;  // error of the last accepted step
};

// Embedded 5(4) pair with PI step-size control. Advances y from t to t_end
// (either direction), landing exactly. F: (t, const double* y, double* f).
template <int N, class F>
void rk_span(F&& rhs, double* y, double& t, double t_end,
             const IntegratorConfig& cfg, RkController& ctl) {
    if (t == t_end) return;
    const double dir = t_end > t ? 1.0 : -1.0;
    double k1[N], k2[N], k3[N], k4[N], k5[N], k6[N], k7[N], ytmp[N], ynew[N];

    rhs(t, y, k1);
    if (ctl.h_abs == 0.0) {
        // Crude first guess; the controller settles within a few steps.
        double fn = 0.0;
        for (int i = 0; i < N; ++i) fn = std::max(fn, std::abs(k1[i]));
        ctl.h_abs = std::clamp(0.01 * std::max(1.0, std::abs(y[0])) / std::max(fn, 1e-4),
                               cfg.min_step, cfg.max_step);
    }

    for (;;) {
        const double remaining = std::abs(t_end - t);
        if (remaining == 0.0) return;
        bool last = false;
        double h_abs = std::clamp(ctl.h_abs, cfg.min_step, cfg.max_step);
        if (h_abs >= remaining) {
            h_abs = remaining;
            last = true;
        }
        const double h = dir * h_abs;

        for (int i = 0; i < N; ++i) ytmp[i] = y[i] + h * kA21 * k1[i];
        rhs(t + kC2 * h, ytmp, k2);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (kA31 * k1[i] + kA32 * k2[i]);
        rhs(t + kC3 * h, ytmp, k3);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
        rhs(t + kC4 * h, ytmp, k4);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] +
                                  kA54 * k4[i]);
        rhs(t + kC5 * h, ytmp, k5);
        for (int i = 0; i < N; ++i)
            ytmp[i] = y[i] + h * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] +
                                  kA64 * k4[i] + kA65 * k5[i]);
        rhs(t + h, ytmp, k6);
        for (int i = 0; i < N; ++i)
            ynew[i] = y[i] + h * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] +
                                  kB5 * k5[i] + kB6 * k6[i]);
        rhs(t + h, ynew, k7);  // FSAL stage

        double err = 0.0;
        bool finite = true;
        for (int i = 0; i < N; ++i) {
            if (!std::isfinite(ynew[i])) finite = false;
            const double esti = h * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] +
                                     kE5 * k5[i] + kE6 * k6[i] + kE7 * k7[i]);
            const double scale =
                cfg.tol + cfg.tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err += (esti / scale) * (esti / scale);
        }
        err = std::sqrt(err / N);
        if (!finite || !std::isfinite(err)) {
            if (h_abs <= cfg.min_step)
                throw IntegrationError(IntegrationFailure::NonFinite, t);
            ctl.h_abs = std::max(0.2 * h_abs, cfg.min_step);
            continue;
        }

        double fac = 0.9 * std::pow(std::max(err, 1e-12), -0.17) *
                     std::pow(ctl.err_prev, 0.04);
        fac = std::clamp(fac, 0.2, 5.0);
        if (err <= 1.0) {
            t = last ? t_end : t + h;
            for (int i = 0; i < N; ++i) {
                y[i] = ynew[i];
                k1[i] = k7[i];
            }
            ctl.err_prev = std::max(err, 1e-4);
            if (!last) ctl.h_abs = std::clamp(h_abs * fac, cfg.min_step, cfg.max_step);
            if (last) return;
        } else {
            if (h_abs <= cfg.min_step)
                throw IntegrationError(IntegrationFailure::StepUnderflow, t);
            ctl.h_abs = std::clamp(h_abs * std::min(fac, 1.0), cfg.min_step,
                                   cfg.max_step);
        }
    }
}

// The linear ramp's damping is only piecewise smooth; both integrators land
// on the knee exactly instead of stepping across it.
double knee_of(const Model& m) {
    const auto& sched = damping_of(m);
    if (std::holds_alternative<LinearRamp>(sched)) return ramp_end(sched);
    return -1.0;
}

bool knee_between(double knee, double a, double b) {
    if (knee <= 0.0) return false;
    return (a < knee && knee < b) || (b < knee && knee < a);
}

template <class Advance>
void advance_with_knee(const Model& m, double from_t, double t_end, Advance&& adv) {
    const double knee = knee_of(m);
    if (knee_between(knee, from_t, t_end)) adv(knee);
    adv(t_end);
}

void check_inputs(const Model& m, const PhaseState& from, double t_end,
                  const IntegratorConfig& cfg) {
    validate(m);
    validate_config(cfg);
    require(state_finite(from), "integrate: non-finite initial state");
    require(std::isfinite(t_end), "integrate: non-finite t_end");
    if (cfg.method == Method::TaylorSeries)
        require(is_cubic(m), "integrate: TaylorSeries supports the oscillator only");
}

}  // namespace

TaylorStep taylor_step(const CubicParams& p, const PhaseState& s,
                       const IntegratorConfig& cfg, double h_init,
                       double t_limit) {
    validate(p);
    validate_config(cfg);
    require(state_finite(s) && std::isfinite(t_limit) && std::isfinite(h_init),
            "taylor_step: non-finite input");
    return taylor_step_core(p, s, cfg, h_init, t_limit, nullptr);
}

PhaseState integrate_to(const Model& m, const PhaseState& from, double t_end,
                        const IntegratorConfig& cfg) {
    check_inputs(m, from, t_end, cfg);
    if (t_end == from.t) return from;

    PhaseState s = from;
    if (cfg.method == Method::TaylorSeries) {
        const auto& p = std::get<CubicParams>(m);
        double ladder = std::min(1.0, cfg.max_step);
        advance_with_knee(m, from.t, t_end, [&](double stop) {
            while (s.t != stop) {
                auto r = taylor_step_core(p, s, cfg, ladder, stop, nullptr);
                s = r.state;
                ladder = r.h_ladder;
            }
        });
    } else {
        double y[2] = {s.q, s.v};
        double t = s.t;
        RkController ctl;
        auto rhs = [&m](double tt, const double* yy, double* f) {
            model_rhs(m, tt, yy[0], yy[1], f[0], f[1]);
        };
        advance_with_knee(m, from.t, t_end, [&](double stop) {
            rk_span<2>(rhs, y, t, stop, cfg, ctl);
        });
        s = PhaseState{y[0], y[1], t};
    }
    return s;
}

std::vector<PhaseState> integrate_path(const Model& m, const PhaseState& from,
                                       const std::vector<double>& times,
                                       const IntegratorConfig& cfg) {
    if (times.empty()) return {};
    check_inputs(m, from, times.back(), cfg);
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(std::isfinite(times[i]), "integrate_path: non-finite time");
        require(times[i] >= (i ? times[i - 1] : from.t),
                "integrate_path: times must be non-decreasing and >= from.t");
    }

    std::vector<PhaseState> out;
    out.reserve(times.size());
    std::size_t idx = 0;
    PhaseState s = from;

    if (cfg.method == Method::TaylorSeries) {
        const auto& p = std::get<CubicParams>(m);
        double ladder = std::min(1.0, cfg.max_step);
        SeriesCoefficients sc;
        while (idx < times.size() && times[idx] == s.t) {
            out.push_back(s);
            ++idx;
        }
        advance_with_knee(m, from.t, times.back(), [&](double stop) {
            while (s.t != stop) {
                auto r = taylor_step_core(p, s, cfg, ladder, stop, &sc);
                // Interior targets come from the same accepted series.
                while (idx < times.size() && times[idx] <= r.state.t) {
                    const double h = times[idx] - s.t;
                    out.push_back(PhaseState{evaluate_series(sc.q, h),
                                             evaluate_series(sc.v, h), times[idx]});
                    ++idx;
                }
                s = r.state;
                ladder = r.h_ladder;
            }
        });
    } else {
        double y[2] = {s.q, s.v};
        double t = s.t;
        RkController ctl;
        auto rhs = [&m](double tt, const double* yy, double* f) {
            model_rhs(m, tt, yy[0], yy[1], f[0], f[1]);
        };
        for (; idx < times.size(); ++idx) {
            advance_with_knee(m, t, times[idx], [&](double stop) {
                rk_span<2>(rhs, y, t, stop, cfg, ctl);
            });
            out.push_back(PhaseState{y[0], y[1], t});
        }
    }
    return out;
}

VariationalResult integrate_variational(const Model& m, const PhaseState& from,
                                        double t_end, const double w0[2][2],
                                        const IntegratorConfig& cfg) {
    IntegratorConfig rkcfg = cfg;
    rkcfg.method = Method::AdaptiveRK;
    check_inputs(m, from, t_end, rkcfg);

    const auto& sched = damping_of(m);
    double y[6] = {from.q, from.v, w0[0][0], w0[0][1], w0[1][0], w0[1][1]};
    double t = from.t;
    auto rhs = [&](double tt, const double* yy, double* f) {
        model_rhs(m, tt, yy[0], yy[1], f[0], f[1]);
        const double a = model_dvdq(m, tt, yy[0]);
        const double g = damping_at(sched, tt);
        f[2] = yy[4];
        f[3] = yy[5];
        f[4] = a * yy[2] - g * yy[4];
        f[5] = a * yy[3] - g * yy[5];
    };
    RkController ctl;
    advance_with_knee(m, from.t, t_end, [&](double stop) {
        rk_span<6>(rhs, y, t, stop, rkcfg, ctl);
    });

    VariationalResult r;
    r.state = PhaseState{y[0], y[1], t};
    r.w[0][0] = y[2];
    r.w[0][1] = y[3];
    r.w[1][0] = y[4];
    r.w[1][1] = y[5];
    return r;
}

}  // namespace basinforge
