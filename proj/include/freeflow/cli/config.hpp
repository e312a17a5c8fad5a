#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "freeflow/forward.hpp"
#include "freeflow/matrix_mc.hpp"
#include "freeflow/measure.hpp"
#include "freeflow/schedule.hpp"

namespace freeflow::cli {

enum class Subcommand { forward, reverse, heat, mc, jko, ineq, debruijn, universality };

std::string to_string(Subcommand s);
std::optional<Subcommand> parse_subcommand(const std::string& text);

// Initial law descriptors:
//   semicircle:m,var   dirac:a   two_atom   mixture:x@w;x@w;...   csv:path
struct InitialLaw {
    enum class Kind { semicircle, dirac, two_atom, mixture, csv };
    Kind kind = Kind::semicircle;
    std::string text = "semicircle:0,1";
    SemicircleParams semicircle{0.0, 1.0};
    double dirac = 0.0;
    std::vector<ParticleMeasure::Atom> atoms;
    std::filesystem::path path;

    bool atomic() const noexcept { return kind == Kind::dirac || kind == Kind::two_atom || kind == Kind::mixture; }
};

InitialLaw parse_initial_law(const std::string& text, const std::filesystem::path& base_dir = {});

struct ExperimentConfig {
    Subcommand subcommand = Subcommand::forward;
    InitialLaw initial_law;
    // Free heat time applied to atomic laws; unset means 0.01 for atomic
    // laws and 0 otherwise.
    std::optional<double> smoothing;
    Schedule schedule = Schedule::constant(1.0, 1.0);
    std::optional<FlowMode> mode;
    std::size_t n_cells = 512;
    std::size_t n_particles = 2048;
    std::size_t n_steps = 400;
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = "output";

    // forward / heat / debruijn
    std::string forward_method = "exact";  // exact | particles
    std::size_t n_times = 50;
    // reverse / universality
    std::size_t reverse_times = 100;
    std::size_t reverse_substeps = 4;
    std::optional<double> grading_scale;
    // mc
    std::size_t mc_members = 32;
    std::size_t mc_N = 512;
    std::size_t mc_snapshots = 5;
    // jko
    double jko_tau = 0.05;
    std::size_t jko_outer = 200;
    std::optional<std::size_t> jko_particles;
    double jko_inner_tol = 1e-8;
    std::size_t jko_inner_max_iters = 200;
    // ineq: "default" runs the twenty-law family, "initial" the configured law
    std::string ineq_family = "default";

    // Every key as given (after defaults are applied), for the manifest.
    std::map<std::string, std::string> echo;

    double effective_smoothing() const;
    FlowMode effective_mode() const;
    ForwardSource forward_source() const;
    // Law at t = 0 on a grid; atomic laws are smoothed first.
    GridMeasure initial_grid() const;
    InitialSpectrum initial_spectrum() const;
    double effective_grading_scale() const;
};

// Flat `key = value` lines with dotted sections; `#` starts a comment.
// Throws ConfigError naming the offending key. Relative csv paths resolve
// against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Keys understood by parse_config.
std::vector<std::string> known_keys();

}  // namespace freeflow::cli
