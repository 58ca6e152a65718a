#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "basinforge/analysis.hpp"
#include "basinforge/basin.hpp"

using namespace basinforge;

namespace {

constexpr int kAlarmExit = 65;  // unclassified fraction above the alarm level

struct ModelOpts {
    std::string model = "cubic";
    double eps = 0.0;
    double ecc = 0.0;
    std::string schedule = "const";
    double gamma0 = 0.0;
    double delta = 0.0;
};

void add_model_options(CLI::App* cmd, ModelOpts& o, bool with_damping) {
    cmd->add_option("--model", o.model, "system: cubic or spinorbit")
        ->check(CLI::IsMember({"cubic", "spinorbit"}))
        ->capture_default_str();
    cmd->add_option("--eps", o.eps, "forcing amplitude")->required();
    cmd->add_option("--ecc", o.ecc, "orbital eccentricity (spinorbit only)");
    if (with_damping) {
        cmd->add_option("--schedule", o.schedule,
                        "damping schedule: const, linear, or exp")
            ->check(CLI::IsMember({"const", "linear", "exp"}))
            ->capture_default_str();
        cmd->add_option("--gamma0", o.gamma0, "plateau damping")->required();
        cmd->add_option("--delta", o.delta, "ramp span gamma0 * T0")
            ->capture_default_str();
    }
}

DampingSchedule build_schedule(const ModelOpts& o) {
    if (o.schedule == "linear") return LinearRamp{o.gamma0, o.delta};
    if (o.schedule == "exp") return ExpRamp{o.gamma0, o.delta};
    return Constant{o.gamma0};
}

Model build_model(const ModelOpts& o) {
    if (o.model == "spinorbit") {
        if (o.ecc <= 0.0)
            throw CLI::ValidationError("--ecc", "spinorbit requires --ecc > 0");
        return make_spin_orbit(o.ecc, o.eps, build_schedule(o));
    }
    return Model{CubicParams{o.eps, build_schedule(o)}};
}

struct IntegratorOpts {
    std::string method;
    double tol = 0.0;
};

void add_integrator_options(CLI::App* cmd, IntegratorOpts& o) {
    cmd->add_option("--method", o.method,
                    "stepper: taylor or rk (default depends on the model)")
        ->check(CLI::IsMember({"taylor", "rk"}));
    cmd->add_option("--tol", o.tol, "integrator tolerance");
}

IntegratorConfig build_integrator(const IntegratorOpts& o, const Model& m) {
    IntegratorConfig cfg = default_config(m);
    if (o.method == "taylor") cfg.method = Method::TaylorSeries;
    if (o.method == "rk") cfg.method = Method::AdaptiveRK;
    if (o.tol > 0.0) cfg.tol = o.tol;
    return cfg;
}

struct SampleOpts {
    std::uint64_t n = 10000;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<double> domain;
    double cluster_tol = 1e-3;
    int q_max = 16;
    bool quiet = false;
};

void add_sample_options(CLI::App* cmd, SampleOpts& o) {
    cmd->add_option("--n", o.n, "number of initial conditions")
        ->capture_default_str();
    cmd->add_option("--seed", o.seed, "sampling seed")->capture_default_str();
    cmd->add_option("--workers", o.workers, "classification threads")
        ->envname("BASINFORGE_WORKERS")
        ->capture_default_str();
    cmd->add_option("--domain", o.domain,
                    "sampling box q_lo q_hi v_lo v_hi (default per model)")
        ->expected(4);
    cmd->add_option("--cluster-tol", o.cluster_tol,
                    "same-attractor radius on representatives")
        ->capture_default_str();
    cmd->add_option("--qmax", o.q_max, "largest subharmonic period searched")
        ->capture_default_str();
    cmd->add_flag("--quiet", o.quiet, "suppress progress output");
}

BasinRunConfig assemble_run(const ModelOpts& mo, const IntegratorOpts& io,
                            const SampleOpts& so) {
    BasinRunConfig cfg;
    cfg.model = build_model(mo);
    cfg.domain = so.domain.size() == 4
                     ? Domain{so.domain[0], so.domain[1], so.domain[2],
                              so.domain[3]}
                     : default_domain(cfg.model);
    cfg.n = so.n;
    cfg.seed = so.seed;
    cfg.workers = so.workers;
    cfg.integrator = build_integrator(io, cfg.model);
    cfg.classifier.q_max = so.q_max;
    cfg.cluster_tol = so.cluster_tol;
    return cfg;
}

std::function<void(std::uint64_t, std::uint64_t)> progress_printer(bool quiet) {
    if (quiet) return {};
    auto last = std::make_shared<int>(-1);
    return [last](std::uint64_t done, std::uint64_t total) {
        const int pct = static_cast<int>(100.0 * done / total);
        if (pct / 5 > *last / 5 || done == total) {
            std::fprintf(stderr, "\rclassified %llu/%llu (%d%%)",
                         static_cast<unsigned long long>(done),
                         static_cast<unsigned long long>(total), pct);
            if (done == total) std::fprintf(stderr, "\n");
            *last = pct;
        }
    };
}

void emit_report(const std::string& out, const BasinRunConfig& cfg,
                 const BasinResult& res) {
    if (out == "-") {
        write_report(std::cout, cfg, res);
    } else {
        write_report_file(out, cfg, res);
        std::fprintf(stderr, "report written to %s\n", out.c_str());
    }
}

int run_basins(const ModelOpts& mo, const IntegratorOpts& io,
               const SampleOpts& so, const std::string& checkpoint, bool resume,
               const std::string& out, double alarm_pct) {
    BasinRunConfig cfg = assemble_run(mo, io, so);
    cfg.checkpoint_path = checkpoint;
    cfg.resume = resume;
    const BasinResult res = estimate_basins(cfg, progress_printer(so.quiet));
    emit_report(out, cfg, res);
    const double un_pct = 100.0 * res.unclassified / res.n;
    std::fprintf(stderr, "n = %llu, unclassified = %llu, wall = %.1fs\n",
                 static_cast<unsigned long long>(res.n),
                 static_cast<unsigned long long>(res.unclassified),
                 res.wall_time_s);
    if (un_pct > alarm_pct) {
        std::fprintf(stderr, "alarm: %.2f%% unclassified exceeds %.2f%%\n",
                     un_pct, alarm_pct);
        return kAlarmExit;
    }
    return 0;
}

int run_ramp_sweep(ModelOpts mo, const IntegratorOpts& io,
                   const SampleOpts& so, const std::vector<double>& deltas,
                   const std::string& out) {
    if (mo.schedule == "const")
        throw std::runtime_error("ramp-sweep needs a linear or exp schedule");
    std::ostringstream body;
    char buf[256];
    for (double delta : deltas) {
        mo.delta = delta;
        BasinRunConfig cfg = assemble_run(mo, io, so);
        if (!so.quiet)
            std::fprintf(stderr, "delta = %g\n", delta);
        const BasinResult res = estimate_basins(cfg, progress_printer(so.quiet));
        for (const auto& g : res.groups) {
            std::snprintf(buf, sizeof buf, "%.17g,%s,%d,%d,%d,%llu,%.1f,%.2f\n",
                          delta, g.label.c_str(), g.id.p, g.id.q, g.variant,
                          static_cast<unsigned long long>(g.count), g.area_pct,
                          g.ci_half_pct);
            body << buf;
        }
    }
    std::ostringstream head;
    head << "# model = " << mo.model << "\n";
    std::snprintf(buf, sizeof buf, "# eps = %.17g\n", mo.eps);
    head << buf;
    if (mo.model == "spinorbit") {
        std::snprintf(buf, sizeof buf, "# ecc = %.17g\n", mo.ecc);
        head << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "# schedule = %s\n# gamma0 = %.17g\n# n = %llu\n# seed = %llu\n",
                  mo.schedule.c_str(), mo.gamma0,
                  static_cast<unsigned long long>(so.n),
                  static_cast<unsigned long long>(so.seed));
    head << buf;
    head << "delta,label,p,q,variant,count,area_pct,ci_half_pct\n";

    if (out == "-") {
        std::cout << head.str() << body.str();
    } else {
        std::ofstream os(out);
        if (!os) throw std::runtime_error("cannot open output file: " + out);
        os << head.str() << body.str();
        std::fprintf(stderr, "sweep written to %s\n", out.c_str());
    }
    return 0;
}

int run_threshold(const ModelOpts& mo, const IntegratorOpts& io, int p, int q,
                  double lo, double hi, double rel_width) {
    ModelOpts probe = mo;
    probe.schedule = "const";
    probe.gamma0 = lo;
    const Model m = build_model(probe);
    const IntegratorConfig icfg = build_integrator(io, m);

    std::optional<ThresholdEstimate> est;
    if (mo.model == "cubic") {
        est = cubic_empirical_threshold(mo.eps, p, q, icfg, {lo, hi}, rel_width);
    } else {
        est = spin_orbit_empirical_threshold(mo.ecc, mo.eps, p, q, icfg,
                                             {lo, hi}, rel_width);
    }
    if (!est) {
        std::fprintf(stderr,
                     "no %d:%d threshold inside [%g, %g]; the cycle must exist "
                     "at the lower edge and fail at the upper edge\n",
                     p, q, lo, hi);
        return 1;
    }
    std::printf("resonance = %d:%d\n", p, q);
    std::printf("gamma_thr in [%.9e, %.9e]\n", est->gamma_lo, est->gamma_hi);
    std::printf("midpoint = %.9e\n", est->value());
    std::printf("bisections = %d\n", est->bisections);
    if (mo.model == "cubic") {
        if (auto ref = cubic_threshold_reference(p, q)) {
            std::printf("perturbative estimate = %.9e (%g * eps^%d)\n",
                        ref->coefficient * std::pow(mo.eps, ref->order),
                        ref->coefficient, ref->order);
        }
    } else {
        const double c = spin_orbit_threshold_coefficient(p, q, mo.ecc);
        if (std::isinf(c)) {
            std::printf("synchronous lock persists at any first-order damping\n");
        } else if (c > 0.0) {
            std::printf("perturbative estimate = %.9e (%g * eps)\n", c * mo.eps,
                        c);
        }
    }
    return 0;
}

int run_floquet(const ModelOpts& mo, const IntegratorOpts& io, int p, int q,
                const std::vector<double>& guess, double t0) {
    const Model m = build_model(mo);
    const IntegratorConfig icfg = build_integrator(io, m);
    const auto orbit =
        find_periodic_orbit(m, p, q, {guess[0], guess[1], t0}, icfg);
    if (!orbit) {
        std::fprintf(stderr, "no %d:%d cycle found from the given guess\n", p,
                     q);
        return 1;
    }
    const auto info = orbit_stability(m, *orbit, icfg);
    const double expected =
        std::exp(-damping_integral(damping_of(m), t0, t0 + info.period));
    std::printf("point: q = %.12g, v = %.12g, t = %.6g\n", orbit->point.q,
                orbit->point.v, orbit->point.t);
    std::printf("residual = %.3e after %d corrections\n", orbit->residual,
                orbit->iterations);
    std::printf("monodromy = [[%.9g, %.9g], [%.9g, %.9g]]\n", info.w[0][0],
                info.w[0][1], info.w[1][0], info.w[1][1]);
    std::printf("det = %.12g (damping integral predicts %.12g)\n", info.det,
                expected);
    std::printf("trace = %.12g\n", info.trace);
    if (info.complex_pair) {
        std::printf("multipliers: conjugate pair, modulus %.9g\n",
                    info.mult_mod[0]);
    } else {
        std::printf("multiplier moduli: %.9g, %.9g\n", info.mult_mod[0],
                    info.mult_mod[1]);
    }
    std::printf("lyapunov exponents: %.9g, %.9g\n", info.lyapunov[0],
                info.lyapunov[1]);
    return 0;
}

int run_spinorbit_params(const std::string& data, bool thresholds) {
    const auto rows = load_satellites_file(data);
    std::printf("pair,primary,satellite,e,omega_T,X,eps,gamma,gamma_per_year");
    const int ps[] = {1, 3, 2, 5, 3, 7};
    const int qs[] = {2, 2, 1, 2, 1, 2};
    if (thresholds)
        std::printf(",c_1_2,c_3_2,c_2_1,c_5_2,c_3_1,c_7_2");
    std::printf("\n");
    for (const auto& d : rows) {
        const auto dv = derive_parameters(d);
        std::printf("%s,%s,%s,%.6g,%.6g,%.6e,%.6e,%.6e,%.6e", d.pair.c_str(),
                    d.primary.c_str(), d.satellite.c_str(), d.e, d.omega_T,
                    dv.X, dv.eps, dv.gamma, dv.gamma_per_year);
        if (thresholds) {
            for (int j = 0; j < 6; ++j)
                std::printf(",%.6e",
                            spin_orbit_threshold_coefficient(ps[j], qs[j], d.e));
        }
        std::printf("\n");
    }
    return 0;
}

// One '# key = value' map plus the group rows of a basins report.
struct ParsedReport {
    std::map<std::string, std::string> meta;
    std::vector<std::vector<std::string>> rows;
};

ParsedReport parse_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    ParsedReport rep;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find(" = ");
            if (eq != std::string::npos)
                rep.meta[line.substr(2, eq - 2)] = line.substr(eq + 3);
            continue;
        }
        if (!header_seen) {  // column header row
            header_seen = true;
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        rep.rows.push_back(std::move(fields));
    }
    return rep;
}

int run_plot_curve(const std::vector<std::string>& reports,
                   const std::string& label, const std::string& x_key) {
    struct Pt {
        double x;
        std::string x_str, area, ci;
    };
    std::vector<Pt> pts;
    for (const auto& path : reports) {
        const auto rep = parse_report(path);
        const auto it = rep.meta.find(x_key);
        if (it == rep.meta.end())
            throw std::runtime_error("report " + path + " has no '" + x_key +
                                     "' entry");
        Pt pt{std::stod(it->second), it->second, "0.0", "0.00"};
        for (const auto& row : rep.rows) {
            if (!row.empty() && row[0] == label && row.size() >= 7) {
                pt.area = row[5];
                pt.ci = row[6];
            }
        }
        pts.push_back(std::move(pt));
    }
    std::sort(pts.begin(), pts.end(),
              [](const Pt& a, const Pt& b) { return a.x < b.x; });
    std::printf("%s,area_pct,ci_half_pct\n", x_key.c_str());
    for (const auto& pt : pts)
        std::printf("%s,%s,%s\n", pt.x_str.c_str(), pt.area.c_str(),
                    pt.ci.c_str());
    return 0;
}

DiffTarget parse_target(const std::string& spec, int variant) {
    DiffTarget t;
    t.variant = variant;
    if (spec == "origin") {
        t.kind = AttractorKind::Origin;
        return t;
    }
    int p = 0, q = 0;
    if (std::sscanf(spec.c_str(), "%d:%d", &p, &q) == 2 && q >= 1) {
        t.kind = AttractorKind::Subharmonic;
        t.id = {p, q};
        return t;
    }
    throw std::runtime_error("bad --target '" + spec +
                             "': expected 'origin' or 'p:q'");
}

int run_plot_diff(const std::string& a_path, const std::string& b_path,
                  const std::string& target_spec, int variant,
                  const std::vector<double>& domain) {
    const auto a = read_checkpoint_file(a_path);
    const auto b = read_checkpoint_file(b_path);
    if (!a) throw std::runtime_error("cannot read checkpoint: " + a_path);
    if (!b) throw std::runtime_error("cannot read checkpoint: " + b_path);
    const DiffTarget target = parse_target(target_spec, variant);
    const BasinDiff diff = basin_diff(*a, *b, target);

    const bool with_ics = domain.size() == 4;
    const Domain dom = with_ics
                           ? Domain{domain[0], domain[1], domain[2], domain[3]}
                           : Domain{};
    std::printf("# gained = %zu\n# lost = %zu\n", diff.gained.size(),
                diff.lost.size());
    std::printf(with_ics ? "change,index,q,v\n" : "change,index\n");
    auto emit = [&](const char* tag, const std::vector<std::uint64_t>& idx) {
        for (std::uint64_t i : idx) {
            if (with_ics) {
                const PhaseState ic = ic_at(dom, a->seed, i);
                std::printf("%s,%llu,%.12g,%.12g\n", tag,
                            static_cast<unsigned long long>(i), ic.q, ic.v);
            } else {
                std::printf("%s,%llu\n", tag,
                            static_cast<unsigned long long>(i));
            }
        }
    };
    emit("gained", diff.gained);
    emit("lost", diff.lost);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"basin-of-attraction toolkit for damped driven resonances"};
    app.set_config("--config", "", "read options from an INI file");
    app.require_subcommand(1);

    // basins
    auto* basins = app.add_subcommand(
        "basins", "Monte Carlo basin areas for one parameter point");
    ModelOpts b_model;
    IntegratorOpts b_int;
    SampleOpts b_sample;
    std::string b_checkpoint, b_out = "-";
    bool b_resume = false;
    double b_alarm = 5.0;
    add_model_options(basins, b_model, true);
    add_integrator_options(basins, b_int);
    add_sample_options(basins, b_sample);
    basins->add_option("--checkpoint", b_checkpoint,
                       "append finished records to this file");
    basins->add_flag("--resume", b_resume,
                     "restore the checkpoint prefix before running");
    basins->add_option("--out", b_out, "report path ('-' for stdout)")
        ->capture_default_str();
    basins
        ->add_option("--alarm-pct", b_alarm,
                     "exit 65 when unclassified exceeds this percentage")
        ->capture_default_str();

    // ramp-sweep
    auto* sweep = app.add_subcommand(
        "ramp-sweep", "basin areas across a list of ramp spans");
    ModelOpts s_model;
    s_model.schedule = "linear";
    IntegratorOpts s_int;
    SampleOpts s_sample;
    std::vector<double> s_deltas;
    std::string s_out = "-";
    add_model_options(sweep, s_model, true);
    add_integrator_options(sweep, s_int);
    add_sample_options(sweep, s_sample);
    auto* deltas_opt = sweep->add_option("--deltas", s_deltas,
                                         "ramp spans to sweep")
                           ->required()
                           ->expected(1, 1000);
    sweep->get_option("--delta")->excludes(deltas_opt);
    sweep->add_option("--out", s_out, "sweep table path ('-' for stdout)")
        ->capture_default_str();

    // threshold
    auto* thresh = app.add_subcommand(
        "threshold", "bisect the damping threshold of a resonance");
    ModelOpts t_model;
    IntegratorOpts t_int;
    int t_p = 1, t_q = 2;
    double t_lo = 0.0, t_hi = 0.0, t_rel = 1e-3;
    add_model_options(thresh, t_model, false);
    add_integrator_options(thresh, t_int);
    thresh->add_option("-p", t_p, "resonance numerator")->capture_default_str();
    thresh->add_option("-q", t_q, "resonance denominator")
        ->capture_default_str();
    thresh->add_option("--lo", t_lo, "bracket lower edge")->required();
    thresh->add_option("--hi", t_hi, "bracket upper edge")->required();
    thresh->add_option("--rel-width", t_rel, "stop width relative to gamma")
        ->capture_default_str();

    // floquet
    auto* floquet = app.add_subcommand(
        "floquet", "locate a cycle and report its linear stability");
    ModelOpts f_model;
    IntegratorOpts f_int;
    int f_p = 1, f_q = 2;
    std::vector<double> f_guess;
    double f_t0 = 0.0;
    add_model_options(floquet, f_model, true);
    add_integrator_options(floquet, f_int);
    floquet->add_option("-p", f_p, "resonance numerator")->capture_default_str();
    floquet->add_option("-q", f_q, "resonance denominator")
        ->capture_default_str();
    floquet->add_option("--guess", f_guess, "initial point q v")
        ->required()
        ->expected(2);
    floquet->add_option("--t0", f_t0, "strobe phase of the guess")
        ->capture_default_str();

    // spinorbit-params
    auto* params = app.add_subcommand(
        "spinorbit-params", "derive model parameters from the catalogue");
    std::string p_data;
    bool p_thresholds = false;
    params->add_option("--data", p_data, "satellite catalogue csv")
        ->envname("BASINFORGE_DATA")
        ->required();
    params->add_flag("--thresholds", p_thresholds,
                     "append capture threshold coefficients");

    // plotdata
    auto* plot = app.add_subcommand("plotdata", "plot-ready series");
    plot->require_subcommand(1);
    auto* curve = plot->add_subcommand(
        "curve", "one basin's area across several reports");
    std::vector<std::string> c_reports;
    std::string c_label = "1:2", c_xkey = "delta";
    curve->add_option("--reports", c_reports, "basins report files")
        ->required()
        ->expected(1, 1000);
    curve->add_option("--label", c_label, "group label to follow")
        ->capture_default_str();
    curve->add_option("--x-key", c_xkey, "metadata key for the x axis")
        ->capture_default_str();
    auto* diff = plot->add_subcommand(
        "diff", "membership changes of one basin between two checkpoints");
    std::string d_a, d_b, d_target = "1:2";
    int d_variant = -1;
    std::vector<double> d_domain;
    diff->add_option("--a", d_a, "baseline checkpoint")->required();
    diff->add_option("--b", d_b, "comparison checkpoint")->required();
    diff->add_option("--target", d_target, "'origin' or 'p:q'")
        ->capture_default_str();
    diff->add_option("--variant", d_variant, "restrict to one cluster")
        ->capture_default_str();
    diff->add_option("--domain", d_domain,
                     "sampling box q_lo q_hi v_lo v_hi; emits coordinates")
        ->expected(4);

    CLI11_PARSE(app, argc, argv);

    try {
        if (basins->parsed())
            return run_basins(b_model, b_int, b_sample, b_checkpoint, b_resume,
                              b_out, b_alarm);
        if (sweep->parsed())
            return run_ramp_sweep(s_model, s_int, s_sample, s_deltas, s_out);
        if (thresh->parsed())
            return run_threshold(t_model, t_int, t_p, t_q, t_lo, t_hi, t_rel);
        if (floquet->parsed())
            return run_floquet(f_model, f_int, f_p, f_q, f_guess, f_t0);
        if (params->parsed())
            return run_spinorbit_params(p_data, p_thresholds);
        if (plot->parsed()) {
            if (curve->parsed())
                return run_plot_curve(c_reports, c_label, c_xkey);
            if (diff->parsed())
                return run_plot_diff(d_a, d_b, d_target, d_variant, d_domain);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
