#include "freeflow/inequality.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "freeflow/errors.hpp"
#include "freeflow/functionals.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

std::string to_string(Convention c) { return c == Convention::as_stated ? "as_stated" : "relative"; }

InequalityReport make_report(std::string name, Convention c, std::string input, double lhs, double rhs,
                             double tolerance) {
    return {std::move(name), lhs, rhs, lhs <= rhs + tolerance, c, std::move(input), tolerance};
}

GridMeasure reference_semicircle(std::size_t n_cells) {
    return semicircle_to_grid(make_semicircle(0.0, 1.0), n_cells);
}

RelativeQuantities relative_quantities(const GridMeasure& mu) {
    const auto sc = reference_semicircle(mu.n_cells());
    const auto xi = conjugate_variable(mu);
    const double le = log_energy(mu);
    const double le_sc = log_energy(sc);
    RelativeQuantities q{};
    q.rel_entropy = (0.5 * moment(mu, 2) - le) - (0.5 * moment(sc, 2) - le_sc);
    q.rel_fisher = relative_fisher(mu, xi);
    q.w2_to_sc = w2(mu, sc);
    q.chi_gap = le_sc - le;  // the additive constants cancel
    q.fisher = free_fisher(mu, xi);
    return q;
}

std::vector<InequalityReport> inequality_reports(const RelativeQuantities& q, const std::string& input) {
    const double w = q.w2_to_sc;
    const double w_sq = w * w;
    return {
        make_report("lsi", Convention::as_stated, input, q.chi_gap, 0.5 * q.fisher),
        make_report("lsi", Convention::relative, input, q.rel_entropy, 0.5 * q.rel_fisher),
        make_report("talagrand", Convention::as_stated, input, w_sq, 2.0 * q.chi_gap),
        make_report("talagrand", Convention::relative, input, w_sq, 2.0 * q.rel_entropy),
        make_report("hwi", Convention::as_stated, input, q.chi_gap, w * std::sqrt(0.5 * q.fisher) - 0.25 * w_sq),
        make_report("hwi", Convention::relative, input, q.rel_entropy, w * std::sqrt(q.rel_fisher) - 0.5 * w_sq),
    };
}

std::pair<InequalityReport, InequalityReport> lsi_report(const GridMeasure& mu, const std::string& input) {
    const auto r = inequality_reports(relative_quantities(mu), input);
    return {r[0], r[1]};
}

std::pair<InequalityReport, InequalityReport> talagrand_report(const GridMeasure& mu, const std::string& input) {
    const auto r = inequality_reports(relative_quantities(mu), input);
    return {r[2], r[3]};
}

std::pair<InequalityReport, InequalityReport> hwi_report(const GridMeasure& mu, const std::string& input) {
    const auto r = inequality_reports(relative_quantities(mu), input);
    return {r[4], r[5]};
}

std::vector<InequalityReport> stam_check(const FlowTrajectory& traj, const std::string& input) {
    traj.validate();
    if (traj.mode != FlowMode::heat) throw DomainError("the Stam check needs a heat-mode trajectory");
    const std::size_t n = traj.size();
    std::vector<double> fisher(n);
    parallel_for(n, [&](std::size_t k) { fisher[k] = free_fisher(traj.measures[k], traj.xi_fields[k]); });
    const double base = 1.0 / fisher.front() - traj.schedule.Lambda(traj.times.front());
    std::vector<InequalityReport> out;
    for (std::size_t k = 0; k < n; ++k) {
        std::ostringstream name;
        name << input << (input.empty() ? "" : " ") << "t=" << traj.times[k];
        // lhs <= rhs + tol with lhs and rhs as documented
        out.push_back(make_report("stam", Convention::relative, name.str(), base + traj.schedule.Lambda(traj.times[k]),
                                  1.0 / fisher[k], kStamTolerance));
    }
    return out;
}

EntropyProduction entropy_production_report(const FlowTrajectory& traj) {
    traj.validate();
    const std::size_t n = traj.size();
    std::vector<double> fisher(n), beta(n);
    parallel_for(n, [&](std::size_t k) {
        fisher[k] = free_fisher(traj.measures[k], traj.xi_fields[k]);
        beta[k] = traj.schedule.beta(traj.times[k]);
    });
    double full = 0.0, corrected = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = traj.times[k] - traj.times[k - 1];
        full += 0.25 * dt * (beta[k] * fisher[k] + beta[k - 1] * fisher[k - 1]);
        corrected += 0.25 * dt * (beta[k] * (fisher[k] - 1.0) + beta[k - 1] * (fisher[k - 1] - 1.0));
    }
    const double dchi = free_entropy_chi(traj.measures.back()) - free_entropy_chi(traj.measures.front());
    return {std::abs(dchi - corrected), std::abs(dchi - full)};
}

std::vector<NamedMeasure> default_family(std::size_t n_cells) {
    std::vector<NamedMeasure> out;
    auto sc = [&](double m, double v) {
        std::ostringstream name;
        name << "semicircle:" << m << ',' << v;
        out.push_back({name.str(), semicircle_to_grid(make_semicircle(m, v), n_cells)});
    };
    for (double v : {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0}) sc(0.0, v);
    for (double m : {-1.0, 0.5, 1.0, 2.0}) sc(m, 1.0);
    sc(0.5, 0.5);
    sc(-1.0, 2.0);
    sc(1.0, 0.25);
    sc(-0.5, 3.0);

    using Atom = ParticleMeasure::Atom;
    const std::vector<std::pair<std::string, std::vector<Atom>>> mixtures{
        {"two_atom:-1,1", {{-1.0, 0.5}, {1.0, 0.5}}},
        {"two_atom:-1@0.3,2@0.7", {{-1.0, 0.3}, {2.0, 0.7}}},
        {"three_atom:-1,0,1", {{-1.0, 1.0 / 3.0}, {0.0, 1.0 / 3.0}, {1.0, 1.0 / 3.0}}},
        {"three_atom:-2@0.2,0@0.5,1.5@0.3", {{-2.0, 0.2}, {0.0, 0.5}, {1.5, 0.3}}},
    };
    SubordinationOptions opts;
    opts.n_cells = n_cells;
    for (const auto& [name, atoms] : mixtures) {
        const auto p = ParticleMeasure::from_atoms(atoms, 3000);
        out.push_back({name + " smoothed 0.01", free_convolve_semicircle(p, 0.01, opts)});
    }
    return out;
}

SuiteSummary summarize(const std::vector<InequalityReport>& reports) {
    SuiteSummary s;
    s.total = reports.size();
    for (const auto& r : reports) {
        if (r.holds) {
            ++s.holds;
        } else if (r.convention == Convention::as_stated) {
            ++s.violations_as_stated;
        } else {
            ++s.violations_relative;
        }
    }
    return s;
}

SuiteResult run_suite(const std::vector<NamedMeasure>& measures) {
    std::vector<std::vector<InequalityReport>> per(measures.size());
    std::vector<double> pairings(measures.size());
    parallel_for(measures.size(), [&](std::size_t i) {
        const auto& mu = measures[i].measure;
        const auto q = relative_quantities(mu);
        per[i] = inequality_reports(q, measures[i].name);
        per[i].push_back(make_report("otto_villani_chain", Convention::relative, measures[i].name,
                                     q.w2_to_sc * q.w2_to_sc, q.rel_fisher));
        pairings[i] = conjugate_pairing(mu, conjugate_variable(mu));
    });
    SuiteResult r;
    for (auto& v : per) r.reports.insert(r.reports.end(), v.begin(), v.end());
    r.summary = summarize(r.reports);
    r.pairings = std::move(pairings);
    return r;
}

std::string reports_json(const std::vector<InequalityReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["name"] = r.name;
        j["convention"] = to_string(r.convention);
        j["lhs"] = r.lhs;
        j["rhs"] = r.rhs;
        j["holds"] = r.holds;
        j["input"] = r.input;
        arr.push_back(j);
    }
    return arr.dump(2);
}

std::string summary_json(const SuiteSummary& s) {
    nlohmann::ordered_json j;
    j["total"] = s.total;
    j["holds"] = s.holds;
    j["violations_as_stated"] = s.violations_as_stated;
    j["violations_relative"] = s.violations_relative;
    return j.dump(2);
}

}  // namespace freeflow
