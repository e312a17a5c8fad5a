#include "freeflow/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "freeflow/cli/svg.hpp"
#include "freeflow/errors.hpp"
#include "freeflow/forward.hpp"
#include "freeflow/functionals.hpp"
#include "freeflow/inequality.hpp"
#include "freeflow/jko.hpp"
#include "freeflow/matrix_mc.hpp"
#include "freeflow/reverse.hpp"
#include "freeflow/version.hpp"

namespace freeflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return sha256_hex(buf.str());
}

std::string RunManifest::to_json() const {
    json j;
    j["library_version"] = library_version;
    j["config"] = config;
    j["wall_clock_seconds"] = wall_clock_seconds;
    json outs = json::array();
    for (const auto& o : outputs) outs.push_back({{"file", o.file}, {"sha256", o.sha256}, {"bytes", o.bytes}});
    j["outputs"] = outs;
    return j.dump(2);
}

namespace {

// Tracks every file it writes so a failed run can be rolled back.
class OutputWriter {
public:
    explicit OutputWriter(fs::path dir) : dir_(std::move(dir)) {
        if (!fs::exists(dir_)) {
            fs::create_directories(dir_);
            created_dir_ = true;
        }
    }

    void text(const std::string& name, const std::string& content) {
        const auto path = dir_ / name;
        written_.push_back(path);
        std::ofstream out(path, std::ios::binary);
        out << content;
        if (!out) throw Error("cannot write " + path.string());
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    template <class Fn>
    void stream(const std::string& name, Fn&& fn) {
        std::ostringstream buf;
        fn(buf);
        text(name, buf.str());
    }

    const std::vector<OutputFile>& files() const { return files_; }
    const fs::path& dir() const { return dir_; }

    void rollback() noexcept {
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
        fs::remove(dir_ / "manifest.json", ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

private:
    fs::path dir_;
    bool created_dir_ = false;
    std::vector<fs::path> written_;
    std::vector<OutputFile> files_;
};

// Runs fn, prefixing any error with the stage name while keeping its type.
template <class Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError("stage '" + name + "': " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError("stage '" + name + "': " + e.what());
    } catch (const DomainError& e) {
        throw DomainError("stage '" + name + "': " + e.what());
    } catch (const std::exception& e) {
        throw Error("stage '" + name + "': " + e.what());
    }
}

std::string grid_csv(const GridMeasure& mu) {
    std::ostringstream out;
    write_csv(out, mu);
    return out.str();
}

std::string density_svg(const std::string& title, const std::vector<std::pair<std::string, const GridMeasure*>>& ms) {
    std::vector<Series> series;
    for (const auto& [label, mu] : ms) {
        Series s{label, {}, {}};
        for (std::size_t i = 0; i < mu->n_cells(); ++i) {
            s.x.push_back(mu->center(i));
            s.y.push_back(mu->density()[i]);
        }
        series.push_back(std::move(s));
    }
    return line_plot_svg(title, "x", "density", series);
}

std::string trajectory_svg(const std::string& title, const std::vector<TrajectoryRow>& rows) {
    std::vector<Series> series{{"mean", {}, {}}, {"variance", {}, {}}, {"chi", {}, {}}, {"Phi*", {}, {}},
                               {"F", {}, {}}};
    for (const auto& r : rows) {
        const double vals[] = {r.mean, r.variance, r.chi, r.fisher, r.free_energy};
        for (std::size_t k = 0; k < series.size(); ++k) {
            series[k].x.push_back(r.t);
            series[k].y.push_back(vals[k]);
        }
    }
    return line_plot_svg(title, "t", "value (each curve rescaled to [0, 1])", series, true);
}

FlowTrajectory build_trajectory(const ExperimentConfig& cfg) {
    const auto mode = cfg.effective_mode();
    if (cfg.forward_method == "particles") {
        const auto mu0 = stage("initial law", [&] { return cfg.initial_grid(); });
        ForwardOptions opts;
        opts.n_particles = cfg.n_particles;
        opts.mode = mode;
        opts.n_cells = cfg.n_cells;
        // n_steps is a floor; stiff schedules need the stable count
        const auto stable = suggested_step_count(to_particles(mu0, cfg.n_particles), cfg.schedule, mode);
        opts.n_steps = std::max(cfg.n_steps, stable);
        opts.n_steps += (cfg.n_times - opts.n_steps % cfg.n_times) % cfg.n_times;
        opts.store_every = opts.n_steps / cfg.n_times;
        return stage("particle transport", [&] { return integrate_forward(mu0, cfg.schedule, opts); });
    }
    auto times = uniform_times(cfg.schedule, cfg.n_times);
    // an unsmoothed atomic law has no density at t = 0
    if (cfg.initial_law.atomic() && cfg.effective_smoothing() == 0.0) times.erase(times.begin());
    const auto src = stage("initial law", [&] { return cfg.forward_source(); });
    return stage("exact marginals", [&] { return sample_trajectory(src, cfg.schedule, times, mode, cfg.n_cells); });
}

void write_trajectory(OutputWriter& out, const FlowTrajectory& traj, const std::string& title,
                      const std::string& summary_name = "summary.json") {
    const auto rows = stage("functionals", [&] { return trajectory_rows(traj); });
    out.stream("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, rows); });
    out.text("trajectory.svg", trajectory_svg(title, rows));
    out.text("final_measure.csv", grid_csv(traj.measures.back()));
    out.text("final_measure.svg", density_svg("final law", {{"t = " + std::to_string(traj.times.back()),
                                                            &traj.measures.back()},
                                                           {"t = " + std::to_string(traj.times.front()),
                                                            &traj.measures.front()}}));
    const auto& last = rows.back();
    json sj;
    sj["t_final"] = last.t;
    sj["Lambda_final"] = last.Lambda;
    sj["mean"] = last.mean;
    sj["variance"] = last.variance;
    sj["chi"] = last.chi;
    sj["fisher"] = last.fisher;
    sj["free_energy"] = last.free_energy;
    sj["w2_to_sc"] = w2(traj.measures.back(), semicircle_to_grid(make_semicircle(0.0, 1.0), 4096, 0.0));
    out.text(summary_name, sj.dump(2));
    const auto ep = stage("entropy production", [&] { return entropy_production_report(traj); });
    json j;
    j["integral_identity_residual"] = ep.integral_identity_residual;
    j["paper_form_residual"] = ep.paper_form_residual;
    out.text("entropy_production.json", j.dump(2));
}

void run_forward(const ExperimentConfig& cfg, OutputWriter& out) {
    const auto traj = build_trajectory(cfg);
    write_trajectory(out, traj, to_string(cfg.effective_mode()) + " flow from " + cfg.initial_law.text);
    if (cfg.subcommand == Subcommand::heat) {
        const auto stam = stage("stam", [&] { return stam_check(traj, cfg.initial_law.text); });
        out.text("stam.json", reports_json(stam));
    }
}

void run_debruijn(const ExperimentConfig& cfg, OutputWriter& out) {
    const auto traj = build_trajectory(cfg);
    write_trajectory(out, traj, "de Bruijn check, " + to_string(cfg.effective_mode()) + " flow");
    const auto pts = stage("de bruijn", [&] { return de_bruijn_residual(traj); });
    out.stream("debruijn.csv", [&](std::ostream& o) {
        o << "t,dchi_dt,half_beta_fisher,ou_corrected\n" << std::setprecision(17);
        for (const auto& p : pts) o << p.t << ',' << p.dchi_dt << ',' << p.half_beta_fisher << ',' << p.ou_corrected << '\n';
    });
    const bool heat = cfg.effective_mode() == FlowMode::heat;
    double worst = 0.0;
    Series d{"dchi/dt", {}, {}}, r{heat ? "beta Phi*/2" : "beta (Phi* - 1)/2", {}, {}};
    for (const auto& p : pts) {
        const double rate = heat ? p.half_beta_fisher : p.ou_corrected;
        worst = std::max(worst, std::abs(p.dchi_dt - rate));
        d.x.push_back(p.t);
        d.y.push_back(p.dchi_dt);
        r.x.push_back(p.t);
        r.y.push_back(rate);
    }
    json j;
    j["mode"] = to_string(cfg.effective_mode());
    j["identity"] = heat ? "dchi/dt = beta Phi*/2" : "dchi/dt = beta (Phi* - 1)/2";
    j["max_abs_residual"] = worst;
    j["n_points"] = pts.size();
    out.text("debruijn.json", j.dump(2));
    out.text("debruijn.svg", line_plot_svg("entropy production rate", "t", "rate", {d, r}));
}

struct ReverseRun {
    FlowTrajectory traj;
    ReverseResult result;
};

ReverseRun reverse_pipeline(const ExperimentConfig& cfg, OutputWriter& out) {
    if (cfg.initial_law.atomic() && cfg.effective_smoothing() == 0.0) {
        throw ConfigError("initial.smoothing: reversal needs a density at t = 0; set it positive");
    }
    const auto src = stage("initial law", [&] { return cfg.forward_source(); });
    const auto times = stage("time grid", [&] {
        return graded_times(cfg.schedule, cfg.reverse_times, cfg.effective_grading_scale());
    });
    auto traj = stage("exact marginals", [&] {
        return sample_trajectory(src, cfg.schedule, times, cfg.effective_mode(), cfg.n_cells);
    });
    ReverseOptions opts;
    opts.n_particles = cfg.n_particles;
    opts.substeps = cfg.reverse_substeps;
    opts.n_cells = cfg.n_cells;
    auto result = stage("reverse transport", [&] { return integrate_reverse(traj, opts); });
    write_trajectory(out, traj, "forward " + to_string(cfg.effective_mode()) + " flow from " + cfg.initial_law.text,
                     "forward_summary.json");
    out.stream("reverse_steps.csv", [&](std::ostream& o) { result.write_steps_csv(o); });
    out.text("reconstructed.csv", grid_csv(result.reconstructed));
    out.text("reconstructed.svg", density_svg("reverse reconstruction", {{"reconstructed", &result.reconstructed},
                                                                        {"initial", &traj.measures.front()}}));
    Series w{"W2 to forward marginal", {}, {}};
    for (const auto& e : result.path) {
        w.x.push_back(e.s);
        w.y.push_back(e.w2_to_forward);
    }
    out.text("reverse.svg", line_plot_svg("reverse path accuracy", "reverse time s", "W2", {w}));
    return {std::move(traj), std::move(result)};
}

void run_reverse(const ExperimentConfig& cfg, OutputWriter& out) {
    const auto r = reverse_pipeline(cfg, out);
    out.text("summary.json", r.result.to_json());
}

void run_universality(const ExperimentConfig& cfg, OutputWriter& out) {
    if (cfg.effective_mode() != FlowMode::ou) throw ConfigError("flow.mode: universality runs the ou flow");
    const auto r = reverse_pipeline(cfg, out);
    const auto sc = semicircle_to_grid(make_semicircle(0.0, 1.0), 4096, 0.0);
    double worst = 0.0;
    for (const auto& e : r.result.path) worst = std::max(worst, e.w2_to_forward);
    json j;
    j["initial_law"] = cfg.initial_law.text;
    j["Lambda_T"] = cfg.schedule.Lambda(cfg.schedule.horizon());
    j["w2_forward_to_sc"] = w2(r.traj.measures.back(), sc);
    j["w2_reverse_to_initial"] = r.result.w2_to_target;
    j["max_marginal_w2"] = worst;
    j["control_energy"] = r.result.energy.J;
    j["delta_chi"] = r.result.energy.delta_chi;
    j["slack"] = r.result.energy.slack;
    out.text("summary.json", j.dump(2));
}

void run_mc(const ExperimentConfig& cfg, OutputWriter& out) {
    McOptions opts;
    opts.n_steps = cfg.n_steps;
    opts.N = cfg.mc_N;
    opts.members = cfg.mc_members;
    opts.rng_seed = cfg.seed;
    const double T = cfg.schedule.horizon();
    for (std::size_t k = 1; k <= cfg.mc_snapshots; ++k) {
        opts.snapshot_times.push_back(T * static_cast<double>(k) / static_cast<double>(cfg.mc_snapshots));
    }
    const auto spec = stage("initial law", [&] { return cfg.initial_spectrum(); });
    const auto snaps = stage("matrix chain", [&] { return run_forward_mc(spec, cfg.schedule, opts); });

    // the chain starts from the exact (unsmoothed) spectrum
    auto src = stage("initial law", [&] { return cfg.forward_source(); });
    if (cfg.initial_law.atomic()) src.smoothing = 0.0;
    std::vector<GridMeasure> predictions;
    stage("prediction", [&] {
        for (const auto& s : snaps) predictions.push_back(exact_marginal(src, cfg.schedule, s.t, FlowMode::ou, cfg.n_cells));
        return 0;
    });
    const auto rows = stage("summary", [&] { return mc_summary(snaps, predictions); });
    out.stream("esd.csv", [&](std::ostream& o) { write_esd_csv(o, snaps); });
    out.text("summary.json", mc_summary_json(rows));
    const auto esd_grid = to_grid(snaps.back().esd.as_measure(), predictions.back().x_min(), predictions.back().x_max(),
                                  std::min<std::size_t>(cfg.n_cells, 128));
    out.text("esd.svg", density_svg("ESD at t = " + std::to_string(snaps.back().t),
                                    {{"pooled ESD", &esd_grid}, {"free prediction", &predictions.back()}}));
}

void run_jko_cmd(const ExperimentConfig& cfg, OutputWriter& out) {
    JkoConfig jc;
    jc.tau = cfg.jko_tau;
    jc.n_outer = cfg.jko_outer;
    jc.n_particles = cfg.jko_particles.value_or(256);
    jc.inner_tol = cfg.jko_inner_tol;
    jc.inner_max_iters = cfg.jko_inner_max_iters;
    stage("jko config", [&] {
        try {
            jc.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
        return 0;
    });
    const auto mu0 = stage("initial law", [&] { return cfg.initial_grid(); });
    const auto run = stage("jko", [&] { return run_jko(mu0, jc); });
    const auto flow_schedule = Schedule::constant(2.0, jc.tau * static_cast<double>(jc.n_outer));
    const double vs_flow = stage("jko vs flow", [&] { return jko_vs_flow(run, flow_schedule); });
    const double vs_exact = stage("jko vs exact flow", [&] { return jko_vs_exact_flow(mu0, run, flow_schedule); });

    out.stream("jko_run.csv", [&](std::ostream& o) { run.write_csv(o); });
    out.stream("jko_final.csv", [&](std::ostream& o) { write_csv(o, run.iterates.back()); });
    bool mono = true;
    for (std::size_t k = 1; k < run.energies.size(); ++k) mono = mono && run.energies[k] <= run.energies[k - 1] + kEdiTolerance;
    json j;
    j["tau"] = jc.tau;
    j["n_outer"] = jc.n_outer;
    j["n_particles"] = jc.n_particles;
    j["w2_final_to_sc"] = w2(run.iterates.back(), semicircle_to_grid(make_semicircle(0.0, 1.0), 4096, 0.0));
    j["all_edi_ok"] = std::all_of(run.edi_ok.begin(), run.edi_ok.end(), [](bool b) { return b; });
    j["energies_nonincreasing"] = mono;
    j["summed_edi_holds"] = run.summed_edi_holds();
    j["jko_vs_flow"] = vs_flow;
    j["jko_vs_exact_flow"] = vs_exact;
    j["evi_half_w2_sq_to_sc"] = evi_series(run);
    out.text("summary.json", j.dump(2));
    Series e{"discrete free energy", {}, {}};
    for (std::size_t k = 0; k < run.energies.size(); ++k) {
        e.x.push_back(static_cast<double>(k));
        e.y.push_back(run.energies[k]);
    }
    out.text("jko.svg", line_plot_svg("JKO energy", "step k", "F", {e}));
}

void run_ineq(const ExperimentConfig& cfg, OutputWriter& out) {
    std::vector<NamedMeasure> family;
    if (cfg.ineq_family == "default") {
        family = stage("family", [&] { return default_family(cfg.n_cells); });
    } else {
        family.push_back({cfg.initial_law.text, stage("initial law", [&] { return cfg.initial_grid(); })});
    }
    const auto result = stage("inequality suite", [&] { return run_suite(family); });
    out.text("reports.json", reports_json(result.reports));
    out.text("summary.json", summary_json(result.summary));
    json p = json::array();
    for (std::size_t i = 0; i < family.size(); ++i) p.push_back({{"input", family[i].name}, {"pairing", result.pairings[i]}});
    out.text("pairings.json", p.dump(2));
    std::vector<std::pair<std::string, const GridMeasure*>> ms;
    for (const auto& f : family) ms.push_back({f.name, &f.measure});
    out.text("family.svg", density_svg("test laws", ms));
}

}  // namespace

RunManifest run(const ExperimentConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    OutputWriter out(cfg.output_dir);
    try {
        switch (cfg.subcommand) {
            case Subcommand::forward:
            case Subcommand::heat: run_forward(cfg, out); break;
            case Subcommand::debruijn: run_debruijn(cfg, out); break;
            case Subcommand::reverse: run_reverse(cfg, out); break;
            case Subcommand::universality: run_universality(cfg, out); break;
            case Subcommand::mc: run_mc(cfg, out); break;
            case Subcommand::jko: run_jko_cmd(cfg, out); break;
            case Subcommand::ineq: run_ineq(cfg, out); break;
        }
        RunManifest m;
        m.config = cfg.echo;
        m.library_version = version();
        m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m.outputs = out.files();
        std::ofstream mf(out.dir() / "manifest.json");
        mf << m.to_json() << '\n';
        if (!mf) throw Error("cannot write manifest");
        return m;
    } catch (...) {
        out.rollback();
        throw;
    }
}

}  // namespace freeflow::cli
