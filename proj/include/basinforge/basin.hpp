#pragma once

#include "basinforge/classify.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace basinforge {

struct Domain {
    double q_lo = -1.0, q_hi = 1.0;
    double v_lo = -1.0, v_hi = 1.0;
};

void validate(const Domain& d);
Domain default_domain(const Model& m);

// Counter-based draws: the value depends only on (seed, counter), so any
// worker can produce any initial condition and resumed runs see the same
// sequence. SplitMix64-style bit mixing.
double uniform01(std::uint64_t seed, std::uint64_t counter);

// The index-th initial condition of a run: coordinates from counters
// 2*index + 1 and 2*index + 2, mapped onto the domain. t = 0.
PhaseState ic_at(const Domain& d, std::uint64_t seed, std::uint64_t index);

struct IcRecord {
    std::uint64_t index = 0;
    AttractorKind kind = AttractorKind::Unclassified;
    ResonanceId id{};
    int variant = -1;   // cluster id within (p, q); -1 before clustering
    PhaseState rep{};   // zeros unless Subharmonic
};

struct BasinGroup {
    std::string label;  // "origin", "p:q" (+ variant letter), "unclassified"
    AttractorKind kind = AttractorKind::Unclassified;
    ResonanceId id{};
    int variant = -1;
    std::uint64_t count = 0;
    double area_pct = 0.0;
    double ci_half_pct = 0.0;  // 95% normal half-width, percent
    PhaseState centroid{};     // canonical cycle point (Subharmonic)
};

struct BasinRunConfig {
    Model model = CubicParams{0.1, Constant{0.015}};
    Domain domain{};
    std::uint64_t n = 10000;
    std::uint64_t seed = 0;
    int workers = 1;
    IntegratorConfig integrator{};
    ClassifierConfig classifier{};
    double cluster_tol = 1e-3;    // same-attractor radius on representatives
    std::string checkpoint_path;  // empty: no checkpointing
    bool resume = false;
};

struct BasinResult {
    std::vector<IcRecord> records;   // one per index, ascending
    std::vector<BasinGroup> groups;  // report rows, see write_report
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    std::uint64_t unclassified = 0;
    std::uint64_t resumed_from = 0;  // records restored from the checkpoint
    double wall_time_s = 0.0;
    std::string fingerprint;
};

// 16 hex digits over everything that defines the sampled labels: model,
// domain, n, seed, tolerances. Worker count and file paths do not matter.
std::string config_fingerprint(const BasinRunConfig& cfg);

// Classify n pseudo-random initial conditions and aggregate basin areas.
// Workers share an atomic index queue; records land in index order, so the
// outputs are identical for any worker count. With a checkpoint path the
// contiguous completed prefix is appended as it grows, and resume = true
// restores it (the header must match seed, fingerprint, and n).
BasinResult estimate_basins(
    const BasinRunConfig& cfg,
    const std::function<void(std::uint64_t done, std::uint64_t total)>& progress = {});

// Report: '# key = value' metadata then one CSV row per group.
void write_report(std::ostream& os, const BasinRunConfig& cfg,
                  const BasinResult& res);
void write_report_file(const std::string& path, const BasinRunConfig& cfg,
                       const BasinResult& res);

// Checkpoint: '#seed=<u64> fingerprint=<hex> n=<u64>' then
// 'index,label_code,p,q,variant,rep_q,rep_v' per record (codes: 0 origin,
// 1 subharmonic, 2 unclassified; %.17g floats).
struct CheckpointData {
    std::uint64_t seed = 0;
    std::string fingerprint;
    std::uint64_t n = 0;
    std::vector<IcRecord> records;
};

void write_checkpoint(std::ostream& os, std::uint64_t seed,
                      const std::string& fingerprint, std::uint64_t n,
                      const std::vector<IcRecord>& records);
// Throws std::runtime_error on a bad header; a malformed or out-of-order
// trailing record truncates the result (interrupted writes stay usable).
CheckpointData read_checkpoint(std::istream& is);
std::optional<CheckpointData> read_checkpoint_file(const std::string& path);

struct DiffTarget {
    AttractorKind kind = AttractorKind::Subharmonic;
    ResonanceId id{};
    int variant = -1;  // -1 matches any variant
};

// Indices whose membership in the target basin changed from a to b.
// Requires matching seed and n (same initial-condition stream).
struct BasinDiff {
    std::vector<std::uint64_t> gained;  // in b, not in a
    std::vector<std::uint64_t> lost;    // in a, not in b
};
BasinDiff basin_diff(const CheckpointData& a, const CheckpointData& b,
                     const DiffTarget& target);

}  // namespace basinforge
