#include "basinforge/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace basinforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void validate_classifier(const ClassifierConfig& cc) {
    require(cc.q_max >= 1 && cc.q_max <= 4096, "classifier: q_max out of range");
    require(cc.window_factor >= 2, "classifier: window_factor must be >= 2");
    require(std::isfinite(cc.match_tol) && cc.match_tol > 0.0,
            "classifier: match_tol must be > 0");
    require(std::isfinite(cc.origin_energy) && cc.origin_energy > 0.0,
            "classifier: origin_energy must be > 0");
    require(cc.transient_folds >= 1, "classifier: transient_folds must be >= 1");
    require(cc.max_retries >= 0, "classifier: max_retries must be >= 0");
}

// Strobe-sample difference; angles compare on the circle.
bool samples_match(const PhaseState& a, const PhaseState& b, bool rotational,
                   double tol) {
    double dq = a.q - b.q;
    if (rotational) dq = std::remainder(dq, kTwoPi);
    return std::max(std::abs(dq), std::abs(a.v - b.v)) < tol;
}

double wrap_angle(double q) {
    double w = std::fmod(q, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

}  // namespace

int count_oscillations(const Model& m, const PhaseState& start, int q,
                       const IntegratorConfig& icfg) {
    require(is_cubic(m), "count_oscillations: oscillator models only");
    require(q >= 1, "count_oscillations: q must be >= 1");
    const int per_period = 64;
    const int n = per_period * q;
    std::vector<double> times(n + 1);
    for (int i = 0; i <= n; ++i) times[i] = start.t + kTwoPi * q * i / n;
    auto path = integrate_path(m, start, times, icfg);
    int flips = 0;
    bool prev_pos = path[0].q >= 0.0;
    for (int i = 1; i <= n; ++i) {
        const bool pos = path[i].q >= 0.0;
        if (pos != prev_pos) ++flips;
        prev_pos = pos;
    }
    if (flips % 2 != 0) return -1;
    return flips / 2;
}

double transient_time(double gamma0, int folds) {
    require(std::isfinite(gamma0) && gamma0 > 0.0,
            "transient_time: gamma0 must be > 0");
    require(folds >= 1, "transient_time: folds must be >= 1");
    return kTwoPi * std::ceil(folds / (gamma0 * kTwoPi));
}

double settle_time(const Model& m, const ClassifierConfig& cc) {
    validate(m);
    validate_classifier(cc);
    const auto& sched = damping_of(m);
    const double g0 = gamma0_of(sched);
    require(g0 > 0.0, "settle_time: needs gamma0 > 0");
    const double raw = ramp_end(sched) + transient_time(g0, cc.transient_folds);
    return kTwoPi * std::ceil(raw / kTwoPi);
}

std::string label_of(const ClassifyResult& r) {
    switch (r.kind) {
        case AttractorKind::Origin:
            return "origin";
        case AttractorKind::Unclassified:
            return "unclassified";
        case AttractorKind::Subharmonic: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%d:%d", r.id.p, r.id.q);
            return buf;
        }
    }
    return "unclassified";
}

ClassifyResult classify_attractor(const Model& m, const PhaseState& ic,
                                  const IntegratorConfig& icfg,
                                  const ClassifierConfig& cc) {
    validate(m);
    validate_classifier(cc);
    require(state_finite(ic), "classify: non-finite initial state");
    const bool rotational = !is_cubic(m);
    const double g0 = gamma0_of(damping_of(m));
    require(g0 > 0.0, "classify: needs gamma0 > 0");

    double t_start = settle_time(m, cc);
    while (t_start < ic.t) t_start += kTwoPi;  // never strobe before ic.t
    const int window = cc.window_factor * cc.q_max;

    PhaseState cur = ic;
    for (int attempt = 0; attempt <= cc.max_retries; ++attempt) {
        cur = integrate_to(m, cur, t_start, icfg);
        if (!rotational && energy_I(cur) < cc.origin_energy)
            return ClassifyResult{AttractorKind::Origin, {}, {}};

        std::vector<double> times(window);
        for (int j = 0; j < window; ++j) times[j] = t_start + kTwoPi * j;
        auto samples = integrate_path(m, cur, times, icfg);
        cur = samples.back();

        int found_q = 0;
        for (int q = 1; q <= cc.q_max && found_q == 0; ++q) {
            bool all = true;
            for (int j = 0; j + q < window; ++j) {
                if (!samples_match(samples[j], samples[j + q], rotational,
                                   cc.match_tol)) {
                    all = false;
                    break;
                }
            }
            if (all) found_q = q;
        }

        if (found_q != 0) {
            int p = 0;
            if (rotational) {
                const double turns =
                    (samples[found_q].q - samples[0].q) / kTwoPi;
                p = static_cast<int>(std::lround(turns));
            } else {
                p = count_oscillations(m, samples[0], found_q, icfg);
                if (p <= 0) {
                    // No coherent winding; treat like a failed match.
                    found_q = 0;
                }
            }
            if (found_q != 0) {
                int q = found_q;
                const int g = std::gcd(std::abs(p), q);
                if (g > 1) {
                    p /= g;
                    q /= g;
                }
                PhaseState rep{};
                bool first = true;
                for (int j = 0; j < found_q; ++j) {
                    PhaseState cand = samples[j];
                    if (rotational) cand.q = wrap_angle(cand.q);
                    if (first || cand.q < rep.q ||
                        (cand.q == rep.q && cand.v < rep.v)) {
                        rep = cand;
                        first = false;
                    }
                }
                rep.t = 0.0;
                return ClassifyResult{AttractorKind::Subharmonic, {p, q}, rep};
            }
        }

        // Extend: wait out another transient from the end of this window,
        // staying on the forcing-period grid.
        t_start = cur.t + transient_time(g0, cc.transient_folds);
    }
    return ClassifyResult{AttractorKind::Unclassified, {}, {}};
}

}  // namespace basinforge
