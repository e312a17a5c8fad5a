#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "freeflow/cli/config.hpp"
#include "freeflow/cli/runner.hpp"
#include "freeflow/errors.hpp"
#include "freeflow/forward.hpp"
#include "freeflow/functionals.hpp"
#include "freeflow/inequality.hpp"
#include "freeflow/jko.hpp"
#include "freeflow/matrix_mc.hpp"
#include "freeflow/measure.hpp"
#include "freeflow/reverse.hpp"
#include "freeflow/schedule.hpp"
#include "freeflow/version.hpp"

namespace py = pybind11;
using namespace freeflow;

namespace {

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(_freeflow, m) {
    m.doc() = "Spectral-measure flows, functionals and solvers";
    m.attr("__version__") = version();

    auto base = py::register_exception<Error>(m, "FreeflowError");
    py::register_exception<DomainError>(m, "DomainError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    // measures
    py::class_<GridMeasure>(m, "GridMeasure")
        .def(py::init<double, double, std::vector<double>>(), py::arg("x_min"), py::arg("x_max"), py::arg("density"))
        .def_static("normalized", &GridMeasure::normalized, py::arg("x_min"), py::arg("x_max"), py::arg("density"))
        .def_property_readonly("x_min", &GridMeasure::x_min)
        .def_property_readonly("x_max", &GridMeasure::x_max)
        .def_property_readonly("n_cells", &GridMeasure::n_cells)
        .def_property_readonly("dx", &GridMeasure::dx)
        .def_property_readonly("density", [](const GridMeasure& g) { return to_vec(g.density()); })
        .def_property_readonly("centers", [](const GridMeasure& g) {
            std::vector<double> c(g.n_cells());
            for (std::size_t i = 0; i < c.size(); ++i) c[i] = g.center(i);
            return c;
        })
        .def("mass", &GridMeasure::mass)
        .def("cdf", &GridMeasure::cdf);

    py::class_<ParticleMeasure>(m, "ParticleMeasure")
        .def(py::init<std::vector<double>>(), py::arg("positions"))
        .def_property_readonly("positions", [](const ParticleMeasure& p) { return to_vec(p.positions()); })
        .def("__len__", &ParticleMeasure::size)
        .def_static(
            "from_atoms",
            [](const std::vector<std::pair<double, double>>& atoms, std::size_t resolution) {
                std::vector<ParticleMeasure::Atom> a;
                for (const auto& [x, w] : atoms) a.push_back({x, w});
                return ParticleMeasure::from_atoms(a, resolution);
            },
            py::arg("atoms"), py::arg("resolution") = 1000);

    py::class_<SemicircleParams>(m, "SemicircleParams")
        .def_readonly("center", &SemicircleParams::center)
        .def_readonly("variance", &SemicircleParams::variance)
        .def_property_readonly("radius", &SemicircleParams::radius);
    m.def("make_semicircle", &make_semicircle, py::arg("center"), py::arg("variance"));
    m.def("semicircle_to_grid", &semicircle_to_grid, py::arg("params"), py::arg("n_cells"), py::arg("padding") = 0.5);
    m.def("to_particles", &to_particles, py::arg("mu"), py::arg("n"));
    m.def("to_grid", py::overload_cast<const ParticleMeasure&, std::size_t, double>(&to_grid), py::arg("p"),
          py::arg("n_cells"), py::arg("padding_fraction") = 0.02);
    m.def("mean", py::overload_cast<const GridMeasure&>(&mean));
    m.def("mean", py::overload_cast<const ParticleMeasure&>(&mean));
    m.def("variance", py::overload_cast<const GridMeasure&>(&variance));
    m.def("variance", py::overload_cast<const ParticleMeasure&>(&variance));
    m.def("w2", py::overload_cast<const GridMeasure&, const GridMeasure&>(&w2));
    m.def("w2", py::overload_cast<const ParticleMeasure&, const ParticleMeasure&>(&w2));
    m.def("w2", py::overload_cast<const GridMeasure&, const ParticleMeasure&>(&w2));
    m.def("w2", py::overload_cast<const ParticleMeasure&, const GridMeasure&>(&w2));

    // functionals
    m.def("hilbert_transform", &hilbert_transform, py::arg("mu"), py::arg("x"));
    m.def("conjugate_variable", [](const GridMeasure& mu) { return conjugate_variable(mu).values; }, py::arg("mu"));
    m.def("log_energy", &log_energy);
    m.def("free_entropy_chi", &free_entropy_chi);
    m.def("free_fisher", py::overload_cast<const GridMeasure&>(&free_fisher));
    m.def("free_energy", &free_energy);
    m.def("conjugate_pairing", [](const GridMeasure& mu) { return conjugate_pairing(mu, conjugate_variable(mu)); });

    // schedules and forward flow
    py::class_<Schedule>(m, "Schedule")
        .def_static("constant", &Schedule::constant, py::arg("beta"), py::arg("horizon"))
        .def_static("linear", &Schedule::linear, py::arg("beta_start"), py::arg("beta_end"), py::arg("horizon"))
        .def_static("cosine", &Schedule::cosine, py::arg("horizon"), py::arg("offset") = 0.008,
                    py::arg("max_angle_fraction") = 0.95)
        .def_property_readonly("horizon", &Schedule::horizon)
        .def("beta", &Schedule::beta)
        .def("Lambda", &Schedule::Lambda)
        .def("time_at_Lambda", &Schedule::time_at_Lambda);

    py::enum_<FlowMode>(m, "FlowMode").value("ou", FlowMode::ou).value("heat", FlowMode::heat);

    m.def("free_convolve_semicircle",
          [](const GridMeasure& mu, double s) { return free_convolve_semicircle(mu, s); }, py::arg("mu"), py::arg("s"));
    m.def("ou_pushforward",
          [](const GridMeasure& mu, const Schedule& s, double t) { return ou_pushforward(mu, s, t); }, py::arg("mu0"),
          py::arg("schedule"), py::arg("t"));
    m.def("ou_pushforward",
          [](const ParticleMeasure& mu, const Schedule& s, double t) { return ou_pushforward(mu, s, t); },
          py::arg("mu0"), py::arg("schedule"), py::arg("t"));

    py::class_<ForwardSource>(m, "ForwardSource")
        .def(py::init([](const GridMeasure& b, double smoothing) { return ForwardSource{b, smoothing}; }),
             py::arg("base"), py::arg("smoothing") = 0.0)
        .def(py::init([](const ParticleMeasure& b, double smoothing) { return ForwardSource{b, smoothing}; }),
             py::arg("base"), py::arg("smoothing") = 0.0)
        .def(py::init([](const SemicircleParams& b, double smoothing) { return ForwardSource{b, smoothing}; }),
             py::arg("base"), py::arg("smoothing") = 0.0);
    m.def("exact_marginal", &exact_marginal, py::arg("source"), py::arg("schedule"), py::arg("t"), py::arg("mode"),
          py::arg("n_cells") = 512);

    py::class_<FlowTrajectory>(m, "FlowTrajectory")
        .def_readonly("times", &FlowTrajectory::times)
        .def_readonly("measures", &FlowTrajectory::measures)
        .def_readonly("mode", &FlowTrajectory::mode)
        .def("__len__", &FlowTrajectory::size);
    m.def(
        "sample_trajectory",
        [](const ForwardSource& src, const Schedule& s, const std::vector<double>& times, FlowMode mode,
           std::size_t n_cells) { return sample_trajectory(src, s, times, mode, n_cells); },
        py::arg("source"), py::arg("schedule"), py::arg("times"), py::arg("mode"), py::arg("n_cells") = 512);
    m.def("graded_times", &graded_times, py::arg("schedule"), py::arg("n"), py::arg("scale"));
    m.def("uniform_times", &uniform_times, py::arg("schedule"), py::arg("n"));
    m.def(
        "integrate_forward",
        [](const GridMeasure& mu0, const Schedule& s, std::size_t n_steps, std::size_t n_particles, FlowMode mode,
           std::size_t n_cells, std::size_t store_every) {
            return integrate_forward(mu0, s, ForwardOptions{n_steps, n_particles, mode, n_cells, store_every});
        },
        py::arg("mu0"), py::arg("schedule"), py::arg("n_steps") = 400, py::arg("n_particles") = 2048,
        py::arg("mode") = FlowMode::ou, py::arg("n_cells") = 512, py::arg("store_every") = 1);

    // reverse flow
    py::class_<ControlEnergy>(m, "ControlEnergy")
        .def_readonly("J", &ControlEnergy::J)
        .def_readonly("delta_chi", &ControlEnergy::delta_chi)
        .def_readonly("slack", &ControlEnergy::slack);
    py::class_<ReverseResult>(m, "ReverseResult")
        .def_readonly("reconstructed", &ReverseResult::reconstructed)
        .def_readonly("w2_to_target", &ReverseResult::w2_to_target)
        .def_readonly("energy", &ReverseResult::energy)
        .def_property_readonly("marginal_w2", [](const ReverseResult& r) {
            std::vector<double> v;
            for (const auto& e : r.path) v.push_back(e.w2_to_forward);
            return v;
        });
    m.def(
        "integrate_reverse",
        [](const FlowTrajectory& traj, std::size_t n_particles, std::size_t substeps, std::size_t n_cells) {
            return integrate_reverse(traj, ReverseOptions{n_particles, substeps, n_cells});
        },
        py::arg("trajectory"), py::arg("n_particles") = 2048, py::arg("substeps") = 4, py::arg("n_cells") = 0);
    m.def("control_energy", &control_energy);

    // matrix Monte Carlo
    m.def(
        "gue_esd",
        [](std::size_t N, double variance, std::size_t members, std::uint64_t seed) {
            return esd(gue_ensemble(N, variance, members, seed)).eigenvalues;
        },
        py::arg("N"), py::arg("variance") = 1.0, py::arg("members") = 32, py::arg("seed") = 1);
    m.def(
        "forward_mc_dirac",
        [](double a, const Schedule& s, std::size_t n_steps, std::size_t N, std::size_t members, std::uint64_t seed) {
            McOptions opts;
            opts.n_steps = n_steps;
            opts.N = N;
            opts.members = members;
            opts.rng_seed = seed;
            return run_forward_mc(DiracSpectrum{a}, s, opts).back().esd.eigenvalues;
        },
        "Pooled final-time eigenvalues of the matrix chain started at a I.", py::arg("a"), py::arg("schedule"),
        py::arg("n_steps") = 100, py::arg("N") = 512, py::arg("members") = 32, py::arg("seed") = 1);

    // JKO
    py::class_<JkoConfig>(m, "JkoConfig")
        .def(py::init<>())
        .def_readwrite("tau", &JkoConfig::tau)
        .def_readwrite("n_outer", &JkoConfig::n_outer)
        .def_readwrite("n_particles", &JkoConfig::n_particles)
        .def_readwrite("inner_tol", &JkoConfig::inner_tol)
        .def_readwrite("inner_max_iters", &JkoConfig::inner_max_iters);
    py::class_<JkoRun>(m, "JkoRun")
        .def_readonly("iterates", &JkoRun::iterates)
        .def_readonly("energies", &JkoRun::energies)
        .def_readonly("transport_costs", &JkoRun::transport_costs)
        .def_readonly("edi_ok", &JkoRun::edi_ok)
        .def("summed_edi_holds", &JkoRun::summed_edi_holds, py::arg("tol") = 1e-8);
    m.def("run_jko", py::overload_cast<const GridMeasure&, const JkoConfig&>(&run_jko));
    m.def("run_jko", py::overload_cast<const ParticleMeasure&, const JkoConfig&>(&run_jko));
    m.def("discrete_free_energy", py::overload_cast<const ParticleMeasure&>(&discrete_free_energy));

    // inequalities
    py::class_<InequalityReport>(m, "InequalityReport")
        .def_readonly("name", &InequalityReport::name)
        .def_property_readonly("convention", [](const InequalityReport& r) { return to_string(r.convention); })
        .def_readonly("lhs", &InequalityReport::lhs)
        .def_readonly("rhs", &InequalityReport::rhs)
        .def_readonly("holds", &InequalityReport::holds)
        .def_readonly("input", &InequalityReport::input);
    m.def("inequality_reports", [](const GridMeasure& mu, const std::string& input) {
        return inequality_reports(relative_quantities(mu), input);
    }, py::arg("mu"), py::arg("input") = "");
    m.def("default_family_summary", [](std::size_t n_cells) {
        const auto s = run_suite(default_family(n_cells)).summary;
        return py::dict(py::arg("total") = s.total, py::arg("holds") = s.holds,
                        py::arg("violations_as_stated") = s.violations_as_stated,
                        py::arg("violations_relative") = s.violations_relative);
    }, py::arg("n_cells") = 512);

    // experiment runner
    m.def(
        "run_config",
        [](const std::string& text, const std::filesystem::path& output_dir, const std::filesystem::path& base_dir) {
            auto cfg = cli::parse_config(text, base_dir);
            cfg.output_dir = output_dir;
            cfg.echo["output_dir"] = output_dir.string();
            const auto manifest = cli::run(cfg);
            py::list files;
            for (const auto& f : manifest.outputs) files.append(f.file);
            return files;
        },
        "Parses a key = value config and runs it; returns the files written besides manifest.json.",
        py::arg("text"), py::arg("output_dir"), py::arg("base_dir") = std::filesystem::path{});
}
