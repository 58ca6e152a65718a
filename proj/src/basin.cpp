#include "basinforge/basin.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace basinforge {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

const char* schedule_name(const DampingSchedule& s) {
    if (std::holds_alternative<Constant>(s)) return "constant";
    if (std::holds_alternative<LinearRamp>(s)) return "linear";
    return "exp";
}

double delta_of(const DampingSchedule& s) {
    return std::visit(
        [](const auto& x) -> double {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Constant>)
                return 0.0;
            else
                return x.delta;
        },
        s);
}

std::string canonical_config(const BasinRunConfig& cfg) {
    char buf[640];
    const auto& sched = damping_of(cfg.model);
    double eps = 0.0, ecc = -1.0;
    if (const auto* c = std::get_if<CubicParams>(&cfg.model)) {
        eps = c->eps;
    } else {
        const auto& s = std::get<SpinOrbitParams>(cfg.model);
        eps = s.eps;
        ecc = s.e;
    }
    std::snprintf(
        buf, sizeof buf,
        "model=%s;eps=%.17g;ecc=%.17g;sched=%s;g0=%.17g;delta=%.17g;"
        "dom=%.17g,%.17g,%.17g,%.17g;n=%llu;seed=%llu;method=%s;tol=%.17g;"
        "order=%d;hmax=%.17g;hmin=%.17g;qmax=%d;wf=%d;mtol=%.17g;oe=%.17g;"
        "folds=%d;retries=%d;ctol=%.17g",
        is_cubic(cfg.model) ? "cubic" : "spinorbit", eps, ecc,
        schedule_name(sched), gamma0_of(sched), delta_of(sched), cfg.domain.q_lo,
        cfg.domain.q_hi, cfg.domain.v_lo, cfg.domain.v_hi,
        static_cast<unsigned long long>(cfg.n),
        static_cast<unsigned long long>(cfg.seed),
        cfg.integrator.method == Method::TaylorSeries ? "taylor" : "rk",
        cfg.integrator.tol, cfg.integrator.series_order, cfg.integrator.max_step,
        cfg.integrator.min_step, cfg.classifier.q_max, cfg.classifier.window_factor,
        cfg.classifier.match_tol, cfg.classifier.origin_energy,
        cfg.classifier.transient_folds, cfg.classifier.max_retries,
        cfg.cluster_tol);
    return buf;
}

void validate_run(const BasinRunConfig& cfg) {
    validate(cfg.model);
    validate(cfg.domain);
    require(cfg.n >= 1, "basins: n must be >= 1");
    require(cfg.workers >= 1 && cfg.workers <= 4096, "basins: workers out of range");
    require(std::isfinite(cfg.cluster_tol) && cfg.cluster_tol > 0.0,
            "basins: cluster_tol must be > 0");
    require(gamma0_of(damping_of(cfg.model)) > 0.0, "basins: needs gamma0 > 0");
    require(!cfg.resume || !cfg.checkpoint_path.empty(),
            "basins: resume needs a checkpoint path");
}

double rep_distance(const PhaseState& a, const PhaseState& b, bool rotational) {
    double dq = a.q - b.q;
    if (rotational) dq = std::remainder(dq, kTwoPi);
    return std::max(std::abs(dq), std::abs(a.v - b.v));
}

void format_record(char* buf, std::size_t cap, const IcRecord& r) {
    std::snprintf(buf, cap, "%llu,%d,%d,%d,%d,%.17g,%.17g\n",
                  static_cast<unsigned long long>(r.index),
                  static_cast<int>(r.kind), r.id.p, r.id.q, r.variant, r.rep.q,
                  r.rep.v);
}

}  // namespace

void validate(const Domain& d) {
    require(std::isfinite(d.q_lo) && std::isfinite(d.q_hi) &&
                std::isfinite(d.v_lo) && std::isfinite(d.v_hi),
            "domain: bounds must be finite");
    require(d.q_lo < d.q_hi && d.v_lo < d.v_hi, "domain: need lo < hi");
}

Domain default_domain(const Model& m) {
    if (is_cubic(m)) return Domain{-1.0, 1.0, -1.0, 1.0};
    return Domain{0.0, kTwoPi, 0.0, 3.5};
}

double uniform01(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(mix64(seed + counter * kGolden) >> 11) * 0x1.0p-53;
}

PhaseState ic_at(const Domain& d, std::uint64_t seed, std::uint64_t index) {
    const double u0 = uniform01(seed, 2 * index + 1);
    const double u1 = uniform01(seed, 2 * index + 2);
    return PhaseState{d.q_lo + (d.q_hi - d.q_lo) * u0,
                      d.v_lo + (d.v_hi - d.v_lo) * u1, 0.0};
}

std::string config_fingerprint(const BasinRunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical_config(cfg))));
    return buf;
}

BasinResult estimate_basins(
    const BasinRunConfig& cfg,
    const std::function<void(std::uint64_t, std::uint64_t)>& progress) {
    validate_run(cfg);
    const auto t_begin = std::chrono::steady_clock::now();

    BasinResult res;
    res.n = cfg.n;
    res.seed = cfg.seed;
    res.fingerprint = config_fingerprint(cfg);
    res.records.resize(cfg.n);

    std::unique_ptr<std::atomic<std::uint8_t>[]> done(
        new std::atomic<std::uint8_t>[cfg.n]);
    for (std::uint64_t i = 0; i < cfg.n; ++i)
        done[i].store(0, std::memory_order_relaxed);

    std::uint64_t k0 = 0;
    if (cfg.resume) {
        auto loaded = read_checkpoint_file(cfg.checkpoint_path);
        if (loaded) {
            if (loaded->seed != cfg.seed || loaded->n != cfg.n ||
                loaded->fingerprint != res.fingerprint)
                throw std::runtime_error(
                    "checkpoint does not belong to this run configuration");
            k0 = loaded->records.size();
            for (std::uint64_t i = 0; i < k0; ++i) {
                res.records[i] = loaded->records[i];
                done[i].store(1, std::memory_order_release);
            }
        }
    }
    res.resumed_from = k0;

    std::ofstream ck;
    if (!cfg.checkpoint_path.empty()) {
        // Rewrite the verified prefix; appended records follow in order.
        ck.open(cfg.checkpoint_path, std::ios::trunc);
        if (!ck) throw std::runtime_error("cannot open checkpoint file");
        std::vector<IcRecord> prefix(res.records.begin(),
                                     res.records.begin() + k0);
        write_checkpoint(ck, cfg.seed, res.fingerprint, cfg.n, prefix);
        ck.flush();
    }

    std::atomic<std::uint64_t> next{k0};
    std::atomic<bool> failed{false};
    std::string error_message;
    std::mutex error_mutex;
    const bool rotational = !is_cubic(cfg.model);

    auto worker = [&] {
        constexpr std::uint64_t kChunk = 16;
        for (;;) {
            const std::uint64_t begin =
                next.fetch_add(kChunk, std::memory_order_relaxed);
            if (begin >= cfg.n || failed.load(std::memory_order_relaxed)) break;
            const std::uint64_t end = std::min(begin + kChunk, cfg.n);
            for (std::uint64_t i = begin; i < end; ++i) {
                IcRecord rec;
                rec.index = i;
                try {
                    const PhaseState ic = ic_at(cfg.domain, cfg.seed, i);
                    const auto cl = classify_attractor(cfg.model, ic,
                                                       cfg.integrator,
                                                       cfg.classifier);
                    rec.kind = cl.kind;
                    if (cl.kind == AttractorKind::Subharmonic) {
                        rec.id = cl.id;
                        rec.rep = cl.representative;
                    }
                } catch (const IntegrationError&) {
                    rec.kind = AttractorKind::Unclassified;
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(error_mutex);
                    if (!failed.exchange(true)) error_message = e.what();
                    break;
                }
                res.records[i] = rec;
                done[i].store(1, std::memory_order_release);
            }
        }
    };

    const int nworkers =
        static_cast<int>(std::min<std::uint64_t>(cfg.workers,
                                                 std::max<std::uint64_t>(cfg.n - k0, 1)));
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (int w = 0; w < nworkers; ++w) pool.emplace_back(worker);

    // The main thread tracks the contiguous completed prefix, appending it to
    // the checkpoint so an interrupted run loses at most the in-flight tail.
    std::uint64_t frontier = k0;
    char line[160];
    auto drain = [&] {
        std::uint64_t old = frontier;
        while (frontier < cfg.n &&
               done[frontier].load(std::memory_order_acquire))
            ++frontier;
        if (ck.is_open()) {
            for (std::uint64_t i = old; i < frontier; ++i) {
                format_record(line, sizeof line, res.records[i]);
                ck << line;
            }
            if (frontier > old) ck.flush();
        }
        if (progress && frontier > old) progress(frontier, cfg.n);
    };
    while (frontier < cfg.n && !failed.load(std::memory_order_relaxed)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        drain();
    }
    for (auto& th : pool) th.join();
    drain();
    if (failed.load()) throw std::runtime_error("basin worker failed: " + error_message);

    // Variant clustering over representatives, in index order so the result
    // does not depend on scheduling.
    std::map<ResonanceId, std::vector<PhaseState>> centers;
    for (auto& rec : res.records) {
        if (rec.kind != AttractorKind::Subharmonic) continue;
        auto& cs = centers[rec.id];
        int v = -1;
        for (std::size_t j = 0; j < cs.size(); ++j) {
            if (rep_distance(rec.rep, cs[j], rotational) <= cfg.cluster_tol) {
                v = static_cast<int>(j);
                break;
            }
        }
        if (v < 0) {
            v = static_cast<int>(cs.size());
            cs.push_back(rec.rep);
        }
        rec.variant = v;
    }
    // Present variants in centroid order, not discovery order.
    std::map<ResonanceId, std::vector<int>> rank;
    for (const auto& [id, cs] : centers) {
        std::vector<int> order(cs.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (cs[a].q != cs[b].q) return cs[a].q < cs[b].q;
            return cs[a].v < cs[b].v;
        });
        std::vector<int> r(cs.size());
        for (std::size_t pos = 0; pos < order.size(); ++pos)
            r[order[pos]] = static_cast<int>(pos);
        rank[id] = r;
    }
    for (auto& rec : res.records)
        if (rec.kind == AttractorKind::Subharmonic)
            rec.variant = rank[rec.id][rec.variant];

    // Aggregate groups: origin, then resonances by (q, p, variant), then
    // unclassified.
    std::uint64_t origin_count = 0;
    std::map<std::tuple<int, int, int>, std::uint64_t> sub_counts;
    for (const auto& rec : res.records) {
        switch (rec.kind) {
            case AttractorKind::Origin:
                ++origin_count;
                break;
            case AttractorKind::Unclassified:
                ++res.unclassified;
                break;
            case AttractorKind::Subharmonic:
                ++sub_counts[{rec.id.q, rec.id.p, rec.variant}];
                break;
        }
    }
    auto make_group = [&](const std::string& label, AttractorKind kind,
                          ResonanceId id, int variant, std::uint64_t count) {
        BasinGroup g;
        g.label = label;
        g.kind = kind;
        g.id = id;
        g.variant = variant;
        g.count = count;
        const double p = static_cast<double>(count) / static_cast<double>(cfg.n);
        g.area_pct = 100.0 * p;
        g.ci_half_pct =
            100.0 * 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(cfg.n));
        return g;
    };
    if (is_cubic(cfg.model) || origin_count > 0)
        res.groups.push_back(
            make_group("origin", AttractorKind::Origin, {}, -1, origin_count));
    for (const auto& [key, count] : sub_counts) {
        const auto [q, p, variant] = key;
        const ResonanceId id{p, q};
        const bool multi = centers[id].size() > 1;
        char lbl[48];
        if (multi)
            std::snprintf(lbl, sizeof lbl, "%d:%d%c", p, q, 'a' + variant);
        else
            std::snprintf(lbl, sizeof lbl, "%d:%d", p, q);
        auto g = make_group(lbl, AttractorKind::Subharmonic, id,
                            multi ? variant : -1, count);
        // canonical cycle point of this cluster
        for (const auto& [id2, cs] : centers) {
            if (id2 == id) {
                for (std::size_t j = 0; j < cs.size(); ++j)
                    if (rank[id][static_cast<int>(j)] == variant)
                        g.centroid = cs[j];
            }
        }
        res.groups.push_back(g);
    }
    res.groups.push_back(make_group("unclassified", AttractorKind::Unclassified,
                                    {}, -1, res.unclassified));

    if (ck.is_open()) {
        ck.close();
        std::ofstream out(cfg.checkpoint_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot rewrite checkpoint file");
        write_checkpoint(out, cfg.seed, res.fingerprint, cfg.n, res.records);
    }

    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin)
            .count();
    return res;
}

void write_report(std::ostream& os, const BasinRunConfig& cfg,
                  const BasinResult& res) {
    char buf[256];
    const auto& sched = damping_of(cfg.model);
    os << "# model = " << (is_cubic(cfg.model) ? "cubic" : "spinorbit") << "\n";
    if (const auto* c = std::get_if<CubicParams>(&cfg.model)) {
        std::snprintf(buf, sizeof buf, "# eps = %.17g\n", c->eps);
        os << buf;
    } else {
        const auto& s = std::get<SpinOrbitParams>(cfg.model);
        std::snprintf(buf, sizeof buf, "# eps = %.17g\n# ecc = %.17g\n", s.eps, s.e);
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "# schedule = %s\n# gamma0 = %.17g\n# delta = %.17g\n",
                  schedule_name(sched), gamma0_of(sched), delta_of(sched));
    os << buf;
    std::snprintf(buf, sizeof buf, "# domain = %.17g,%.17g,%.17g,%.17g\n",
                  cfg.domain.q_lo, cfg.domain.q_hi, cfg.domain.v_lo,
                  cfg.domain.v_hi);
    os << buf;
    std::snprintf(buf, sizeof buf, "# n = %llu\n# seed = %llu\n",
                  static_cast<unsigned long long>(res.n),
                  static_cast<unsigned long long>(res.seed));
    os << buf;
    std::snprintf(buf, sizeof buf, "# method = %s\n# tol = %.17g\n",
                  cfg.integrator.method == Method::TaylorSeries ? "taylor" : "rk",
                  cfg.integrator.tol);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "# fingerprint = %s\n# resumed_from = %llu\n"
                  "# unclassified = %llu\n# wall_time_s = %.3f\n",
                  res.fingerprint.c_str(),
                  static_cast<unsigned long long>(res.resumed_from),
                  static_cast<unsigned long long>(res.unclassified),
                  res.wall_time_s);
    os << buf;
    os << "label,p,q,variant,count,area_pct,ci_half_pct\n";
    for (const auto& g : res.groups) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%llu,%.1f,%.2f\n",
                      g.label.c_str(), g.id.p, g.id.q, g.variant,
                      static_cast<unsigned long long>(g.count), g.area_pct,
                      g.ci_half_pct);
        os << buf;
    }
}

void write_report_file(const std::string& path, const BasinRunConfig& cfg,
                       const BasinResult& res) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open report file: " + path);
    write_report(os, cfg, res);
}

void write_checkpoint(std::ostream& os, std::uint64_t seed,
                      const std::string& fingerprint, std::uint64_t n,
                      const std::vector<IcRecord>& records) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "#seed=%llu fingerprint=%s n=%llu\n",
                  static_cast<unsigned long long>(seed), fingerprint.c_str(),
                  static_cast<unsigned long long>(n));
    os << buf;
    for (const auto& r : records) {
        format_record(buf, sizeof buf, r);
        os << buf;
    }
}

CheckpointData read_checkpoint(std::istream& is) {
    CheckpointData data;
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("checkpoint: missing header");
    unsigned long long seed = 0, n = 0;
    char fp[64] = {0};
    if (std::sscanf(line.c_str(), "#seed=%llu fingerprint=%63[0-9a-fA-F] n=%llu",
                    &seed, fp, &n) != 3)
        throw std::runtime_error("checkpoint: bad header");
    data.seed = seed;
    data.n = n;
    data.fingerprint = fp;
    while (std::getline(is, line)) {
        if (line.empty()) break;
        unsigned long long index = 0;
        int code = 0, p = 0, q = 0, variant = 0;
        double rq = 0.0, rv = 0.0;
        if (std::sscanf(line.c_str(), "%llu,%d,%d,%d,%d,%lf,%lf", &index, &code,
                        &p, &q, &variant, &rq, &rv) != 7)
            break;  // interrupted write: keep the valid prefix
        if (index != data.records.size() || index >= n || code < 0 || code > 2)
            break;
        IcRecord r;
        r.index = index;
        r.kind = static_cast<AttractorKind>(code);
        r.id = ResonanceId{p, q};
        r.variant = variant;
        r.rep = PhaseState{rq, rv, 0.0};
        data.records.push_back(r);
    }
    return data;
}

std::optional<CheckpointData> read_checkpoint_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) return std::nullopt;
    return read_checkpoint(is);
}

BasinDiff basin_diff(const CheckpointData& a, const CheckpointData& b,
                     const DiffTarget& target) {
    require(a.seed == b.seed, "diff: checkpoints use different seeds");
    require(a.n == b.n, "diff: checkpoints use different sample counts");
    auto matches = [&](const IcRecord& r) {
        if (r.kind != target.kind) return false;
        if (r.kind != AttractorKind::Subharmonic) return true;
        if (!(r.id == target.id)) return false;
        return target.variant < 0 || r.variant == target.variant;
    };
    std::vector<char> in_a(a.n, 0), in_b(b.n, 0);
    for (const auto& r : a.records) in_a[r.index] = matches(r) ? 1 : 0;
    for (const auto& r : b.records) in_b[r.index] = matches(r) ? 1 : 0;
    BasinDiff d;
    for (std::uint64_t i = 0; i < a.n; ++i) {
        if (in_b[i] && !in_a[i]) d.gained.push_back(i);
        if (in_a[i] && !in_b[i]) d.lost.push_back(i);
    }
    return d;
}

}  // namespace basinforge
