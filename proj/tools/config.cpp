#include "freeflow/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <fstream>
#include <functional>
#include <sstream>

#include "freeflow/errors.hpp"

namespace freeflow::cli {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    double x = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end || !std::isfinite(x)) {
        throw ConfigError(key + ": expected a real number, got '" + v + "'");
    }
    return x;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    std::uint64_t x = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, x);
    if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return x;
}

std::size_t parse_bounded(const std::string& key, const std::string& v, std::size_t lo, std::size_t hi) {
    const auto x = parse_unsigned(key, v);
    if (x < lo || x > hi) {
        throw ConfigError(key + ": value " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<std::size_t>(x);
}

double parse_positive(const std::string& key, const std::string& v) {
    const double x = parse_real(key, v);
    if (!(x > 0.0)) throw ConfigError(key + ": must be positive");
    return x;
}

std::string parse_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> options) {
    for (const char* o : options) {
        if (v == o) return v;
    }
    std::string msg = key + ": expected one of";
    for (const char* o : options) msg += std::string(" ") + o;
    throw ConfigError(msg + ", got '" + v + "'");
}

// Schedule fields are collected first and validated together.
struct ScheduleDraft {
    std::string kind = "constant";
    std::optional<double> beta, beta_start, beta_end, T, offset, max_angle_fraction;
};

Schedule build_schedule(const ScheduleDraft& d) {
    const double T = d.T.value_or(1.0);
    try {
        if (d.kind == "constant") {
            if (d.beta_start || d.beta_end || d.offset || d.max_angle_fraction) {
                throw ConfigError("schedule: constant schedules take only schedule.beta and schedule.T");
            }
            return Schedule::constant(d.beta.value_or(1.0), T);
        }
        if (d.kind == "linear") {
            if (d.beta || d.offset || d.max_angle_fraction) {
                throw ConfigError("schedule: linear schedules take schedule.beta_start, schedule.beta_end, schedule.T");
            }
            return Schedule::linear(d.beta_start.value_or(0.1), d.beta_end.value_or(20.0), T);
        }
        if (d.beta || d.beta_start || d.beta_end) {
            throw ConfigError("schedule: cosine schedules take schedule.offset, schedule.max_angle_fraction, schedule.T");
        }
        return Schedule::cosine(T, d.offset.value_or(0.008), d.max_angle_fraction.value_or(0.95));
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
}

std::string format_real(double x) {
    std::ostringstream out;
    out << std::setprecision(17) << x;
    return out.str();
}

}  // namespace

std::string to_string(Subcommand s) {
    switch (s) {
        case Subcommand::forward: return "forward";
        case Subcommand::reverse: return "reverse";
        case Subcommand::heat: return "heat";
        case Subcommand::mc: return "mc";
        case Subcommand::jko: return "jko";
        case Subcommand::ineq: return "ineq";
        case Subcommand::debruijn: return "debruijn";
        case Subcommand::universality: return "universality";
    }
    return "unknown";
}

std::optional<Subcommand> parse_subcommand(const std::string& text) {
    for (auto s : {Subcommand::forward, Subcommand::reverse, Subcommand::heat, Subcommand::mc, Subcommand::jko,
                   Subcommand::ineq, Subcommand::debruijn, Subcommand::universality}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

InitialLaw parse_initial_law(const std::string& text, const std::filesystem::path& base_dir) {
    InitialLaw law;
    law.text = text;
    const auto colon = text.find(':');
    const std::string head = trim(text.substr(0, colon));
    const std::string args = colon == std::string::npos ? "" : trim(text.substr(colon + 1));
    const std::string key = "initial_law";
    if (head == "semicircle") {
        const auto parts = split(args, ',');
        if (parts.size() != 2) throw ConfigError(key + ": expected semicircle:m,var");
        law.kind = InitialLaw::Kind::semicircle;
        const double m = parse_real(key, parts[0]);
        const double v = parse_real(key, parts[1]);
        if (!(v > 0.0)) throw ConfigError(key + ": semicircle variance must be positive (use dirac:a for a point mass)");
        law.semicircle = make_semicircle(m, v);
    } else if (head == "dirac") {
        law.kind = InitialLaw::Kind::dirac;
        law.dirac = parse_real(key, args);
        law.atoms = {{law.dirac, 1.0}};
    } else if (head == "two_atom") {
        if (!args.empty()) throw ConfigError(key + ": two_atom takes no arguments (atoms at -1 and +1)");
        law.kind = InitialLaw::Kind::two_atom;
        law.atoms = {{-1.0, 0.5}, {1.0, 0.5}};
    } else if (head == "mixture") {
        law.kind = InitialLaw::Kind::mixture;
        double total = 0.0;
        for (const auto& item : split(args, ';')) {
            const auto at = item.find('@');
            if (at == std::string::npos) throw ConfigError(key + ": mixture entries are position@weight");
            const double x = parse_real(key, trim(item.substr(0, at)));
            const double w = parse_real(key, trim(item.substr(at + 1)));
            if (!(w > 0.0)) throw ConfigError(key + ": mixture weights must be positive");
            law.atoms.push_back({x, w});
            total += w;
        }
        if (law.atoms.empty()) throw ConfigError(key + ": mixture needs at least one atom");
        for (auto& a : law.atoms) a.weight /= total;
        std::sort(law.atoms.begin(), law.atoms.end(), [](auto& a, auto& b) { return a.position < b.position; });
    } else if (head == "csv") {
        law.kind = InitialLaw::Kind::csv;
        law.path = args;
        if (law.path.is_relative() && !base_dir.empty()) law.path = base_dir / law.path;
        if (!std::filesystem::exists(law.path)) throw ConfigError(key + ": file not found: " + law.path.string());
    } else {
        throw ConfigError(key + ": unknown law '" + text + "' (semicircle:m,var | dirac:a | two_atom | mixture:x@w;... | csv:path)");
    }
    return law;
}

std::vector<std::string> known_keys() {
    return {"subcommand",       "initial_law",          "initial.smoothing", "schedule.kind",
            "schedule.beta",    "schedule.beta_start",  "schedule.beta_end", "schedule.T",
            "schedule.offset",  "schedule.max_angle_fraction", "flow.mode", "resolution.n_cells",
            "resolution.n_particles", "resolution.n_steps", "seed",     "output_dir",
            "forward.method",   "output.n_times",       "reverse.n_times",   "reverse.substeps",
            "reverse.grading_scale", "mc.members",      "mc.N",              "mc.n_snapshots",
            "jko.tau",          "jko.n_outer",          "jko.n_particles",   "jko.inner_tol",
            "jko.inner_max_iters", "ineq.family"};
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    ScheduleDraft sched;
    bool have_subcommand = false;
    std::map<std::string, std::string> seen;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"subcommand",
         [&](auto& k, auto& v) {
             const auto s = parse_subcommand(v);
             if (!s) throw ConfigError(k + ": unknown subcommand '" + v + "'");
             cfg.subcommand = *s;
             have_subcommand = true;
         }},
        {"initial_law", [&](auto&, auto& v) { cfg.initial_law = parse_initial_law(v, base_dir); }},
        {"initial.smoothing",
         [&](auto& k, auto& v) {
             const double s = parse_real(k, v);
             if (!(s >= 0.0)) throw ConfigError(k + ": must be nonnegative");
             cfg.smoothing = s;
         }},
        {"schedule.kind", [&](auto& k, auto& v) { sched.kind = parse_choice(k, v, {"constant", "linear", "cosine"}); }},
        {"schedule.beta",
         [&](auto& k, auto& v) {
             const double b = parse_real(k, v);
             if (!(b > 0.0)) throw ConfigError("β must be positive");
             sched.beta = b;
         }},
        {"schedule.beta_start", [&](auto& k, auto& v) { sched.beta_start = parse_real(k, v); }},
        {"schedule.beta_end", [&](auto& k, auto& v) { sched.beta_end = parse_real(k, v); }},
        {"schedule.T", [&](auto& k, auto& v) { sched.T = parse_positive(k, v); }},
        {"schedule.offset", [&](auto& k, auto& v) { sched.offset = parse_real(k, v); }},
        {"schedule.max_angle_fraction", [&](auto& k, auto& v) { sched.max_angle_fraction = parse_real(k, v); }},
        {"flow.mode",
         [&](auto& k, auto& v) { cfg.mode = parse_choice(k, v, {"ou", "heat"}) == "ou" ? FlowMode::ou : FlowMode::heat; }},
        {"resolution.n_cells", [&](auto& k, auto& v) { cfg.n_cells = parse_bounded(k, v, 64, 16384); }},
        {"resolution.n_particles", [&](auto& k, auto& v) { cfg.n_particles = parse_bounded(k, v, 16, 65536); }},
        {"resolution.n_steps", [&](auto& k, auto& v) { cfg.n_steps = parse_bounded(k, v, 1, 1000000); }},
        {"seed", [&](auto& k, auto& v) { cfg.seed = parse_unsigned(k, v); }},
        {"output_dir", [&](auto&, auto& v) { cfg.output_dir = v; }},
        {"forward.method", [&](auto& k, auto& v) { cfg.forward_method = parse_choice(k, v, {"exact", "particles"}); }},
        {"output.n_times", [&](auto& k, auto& v) { cfg.n_times = parse_bounded(k, v, 2, 100000); }},
        {"reverse.n_times", [&](auto& k, auto& v) { cfg.reverse_times = parse_bounded(k, v, 2, 100000); }},
        {"reverse.substeps", [&](auto& k, auto& v) { cfg.reverse_substeps = parse_bounded(k, v, 1, 10000); }},
        {"reverse.grading_scale", [&](auto& k, auto& v) { cfg.grading_scale = parse_positive(k, v); }},
        {"mc.members", [&](auto& k, auto& v) { cfg.mc_members = parse_bounded(k, v, 1, 4096); }},
        {"mc.N", [&](auto& k, auto& v) { cfg.mc_N = parse_bounded(k, v, 2, 8192); }},
        {"mc.n_snapshots", [&](auto& k, auto& v) { cfg.mc_snapshots = parse_bounded(k, v, 1, 10000); }},
        {"jko.tau", [&](auto& k, auto& v) { cfg.jko_tau = parse_positive(k, v); }},
        {"jko.n_outer", [&](auto& k, auto& v) { cfg.jko_outer = parse_bounded(k, v, 1, 1000000); }},
        {"jko.n_particles", [&](auto& k, auto& v) { cfg.jko_particles = parse_bounded(k, v, 16, 65536); }},
        {"jko.inner_tol", [&](auto& k, auto& v) { cfg.jko_inner_tol = parse_positive(k, v); }},
        {"jko.inner_max_iters", [&](auto& k, auto& v) { cfg.jko_inner_max_iters = parse_bounded(k, v, 1, 100000); }},
        {"ineq.family", [&](auto& k, auto& v) { cfg.ineq_family = parse_choice(k, v, {"default", "initial"}); }},
    };

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + key + "'");
        if (seen.count(key)) throw ConfigError("duplicate key '" + key + "'");
        if (value.empty()) throw ConfigError(key + ": missing value");
        it->second(key, value);
        seen[key] = value;
    }
    if (!have_subcommand) throw ConfigError("subcommand required");
    cfg.schedule = build_schedule(sched);

    if (cfg.subcommand == Subcommand::heat) {
        if (cfg.mode && *cfg.mode != FlowMode::heat) throw ConfigError("flow.mode: the heat subcommand runs in heat mode");
        cfg.mode = FlowMode::heat;
    }
    if (cfg.forward_method == "particles" && cfg.initial_law.atomic() && cfg.effective_smoothing() == 0.0) {
        throw ConfigError("forward.method: particle transport needs a density; set initial.smoothing > 0");
    }

    cfg.echo = seen;
    cfg.echo["subcommand"] = to_string(cfg.subcommand);
    cfg.echo["initial_law"] = cfg.initial_law.text;
    cfg.echo["initial.smoothing"] = format_real(cfg.effective_smoothing());
    cfg.echo["schedule.kind"] = to_string(cfg.schedule.kind());
    cfg.echo["schedule.T"] = format_real(cfg.schedule.horizon());
    cfg.echo["flow.mode"] = to_string(cfg.effective_mode());
    cfg.echo["resolution.n_cells"] = std::to_string(cfg.n_cells);
    cfg.echo["resolution.n_particles"] = std::to_string(cfg.n_particles);
    cfg.echo["resolution.n_steps"] = std::to_string(cfg.n_steps);
    cfg.echo["seed"] = std::to_string(cfg.seed);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

double ExperimentConfig::effective_smoothing() const {
    if (smoothing) return *smoothing;
    return initial_law.atomic() ? 0.01 : 0.0;
}

FlowMode ExperimentConfig::effective_mode() const {
    if (mode) return *mode;
    return subcommand == Subcommand::heat || subcommand == Subcommand::debruijn ? FlowMode::heat : FlowMode::ou;
}

namespace {

GridMeasure read_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    return read_grid_csv(in);
}

}  // namespace

ForwardSource ExperimentConfig::forward_source() const {
    const double s = effective_smoothing();
    switch (initial_law.kind) {
        case InitialLaw::Kind::semicircle: return {initial_law.semicircle, s};
        case InitialLaw::Kind::dirac: return {make_semicircle(initial_law.dirac, 0.0), s};
        case InitialLaw::Kind::two_atom:
        case InitialLaw::Kind::mixture: return {ParticleMeasure::from_atoms(initial_law.atoms, 3000), s};
        case InitialLaw::Kind::csv: return {read_grid(initial_law.path), s};
    }
    throw ConfigError("unsupported initial law");
}

GridMeasure ExperimentConfig::initial_grid() const {
    const auto src = forward_source();
    if (initial_law.atomic() && effective_smoothing() == 0.0) {
        throw ConfigError("initial.smoothing: an atomic initial law has no density at t = 0; set it positive");
    }
    return exact_marginal(src, schedule, 0.0, effective_mode(), n_cells);
}

InitialSpectrum ExperimentConfig::initial_spectrum() const {
    switch (initial_law.kind) {
        case InitialLaw::Kind::dirac: return DiracSpectrum{initial_law.dirac};
        case InitialLaw::Kind::two_atom: return TwoAtomSpectrum{};
        case InitialLaw::Kind::mixture: return ParticleMeasure::from_atoms(initial_law.atoms, 3000);
        case InitialLaw::Kind::semicircle: return semicircle_to_grid(initial_law.semicircle, n_cells);
        case InitialLaw::Kind::csv: return read_grid(initial_law.path);
    }
    throw ConfigError("unsupported initial law");
}

double ExperimentConfig::effective_grading_scale() const {
    if (grading_scale) return *grading_scale;
    if (initial_law.atomic()) return std::max(effective_smoothing(), 1e-3);
    if (initial_law.kind == InitialLaw::Kind::semicircle) return initial_law.semicircle.variance;
    return std::max(variance(read_grid(initial_law.path)), 1e-3);
}

}  // namespace freeflow::cli
