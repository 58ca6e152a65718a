#pragma once

#include "basinforge/integrate.hpp"
#include "basinforge/models.hpp"

#include <string>

namespace basinforge {

enum class AttractorKind { Origin, Subharmonic, Unclassified };

// p:q in lowest terms, q >= 1. For the oscillator p counts half the sign
// changes of q(t) over q forcing periods; for the rotational model p counts
// net turns over the same window.
struct ResonanceId {
    int p = 0;
    int q = 0;
    friend bool operator==(const ResonanceId&, const ResonanceId&) = default;
    friend auto operator<=>(const ResonanceId&, const ResonanceId&) = default;
};

struct ClassifyResult {
    AttractorKind kind = AttractorKind::Unclassified;
    ResonanceId id{};             // meaningful for Subharmonic only
    PhaseState representative{};  // phase-0 cycle point, see classify_attractor
};

struct ClassifierConfig {
    int q_max = 16;
    int window_factor = 3;        // strobe window = window_factor * q_max samples
    double match_tol = 1e-5;      // max-norm agreement between strobe samples
    double origin_energy = 1e-8;  // oscillator settles to the origin below this
    int transient_folds = 20;     // accumulated damping e-folds to wait out
    int max_retries = 1;          // window extensions before giving up
};

// Least whole number of forcing periods covering folds/gamma0 time units.
double transient_time(double gamma0, int folds = 20);

// Absolute time at which strobing may start: ramp-up done plus the transient
// wait, rounded up to a forcing period.
double settle_time(const Model& m, const ClassifierConfig& cc);

// "origin", "p:q", or "unclassified".
std::string label_of(const ClassifyResult& r);

// Half the sign changes of q(t) over [start.t, start.t + 2 pi q], sampled
// densely enough that consecutive crossings cannot share a subinterval.
// Oscillator only. Returns -1 if the count comes out odd.
int count_oscillations(const Model& m, const PhaseState& start, int q,
                       const IntegratorConfig& icfg);

// Integrate from ic (forward) until settled, then strobe at the forcing
// period and look for the smallest q <= q_max that matches the whole window.
// The representative is the lexicographically smallest (q, v) among the
// cycle's strobe points (angle wrapped to [0, 2 pi) for the rotational
// model), so it does not depend on which basin point found the cycle.
ClassifyResult classify_attractor(const Model& m, const PhaseState& ic,
                                  const IntegratorConfig& icfg,
                                  const ClassifierConfig& cc);

}  // namespace basinforge
