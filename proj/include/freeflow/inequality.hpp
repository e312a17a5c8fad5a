#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "freeflow/forward.hpp"
#include "freeflow/measure.hpp"

namespace freeflow {

// as_stated: entropy written as chi differences against the semicircle.
// relative: entropy relative to the quadratic potential, F[mu] - F[SC(0,1)].
enum class Convention { as_stated, relative };

std::string to_string(Convention c);

struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;  // lhs <= rhs + tolerance
    Convention convention = Convention::relative;
    std::string input;
    double tolerance = 1e-9;
};

InequalityReport make_report(std::string name, Convention c, std::string input, double lhs, double rhs,
                             double tolerance = 1e-9);

// SC(0,1) on the same cell count and padding as semicircle_to_grid's
// default, so that translated standard semicircles cancel exactly.
GridMeasure reference_semicircle(std::size_t n_cells);

struct RelativeQuantities {
    double rel_entropy;  // F[mu] - F[SC(0,1)]
    double rel_fisher;   // int (Xi - x)^2 d mu
    double w2_to_sc;
    // as-stated ingredients
    double chi_gap;  // chi(SC(0,1)) - chi(mu)
    double fisher;   // Phi*(mu)
};

RelativeQuantities relative_quantities(const GridMeasure& mu);

// {as_stated, relative}
std::pair<InequalityReport, InequalityReport> lsi_report(const GridMeasure& mu, const std::string& input = "");
std::pair<InequalityReport, InequalityReport> talagrand_report(const GridMeasure& mu, const std::string& input = "");
std::pair<InequalityReport, InequalityReport> hwi_report(const GridMeasure& mu, const std::string& input = "");

// Same three from precomputed quantities.
std::vector<InequalityReport> inequality_reports(const RelativeQuantities& q, const std::string& input);

// Along a heat trajectory: lhs = 1/Phi*(mu_0) + Lambda(t), rhs = 1/Phi*(mu_t),
// reported as holding when rhs >= lhs - 1e-2. Lambda is the elapsed
// semicircular variance, which is t for beta = 1.
inline constexpr double kStamTolerance = 1e-2;
std::vector<InequalityReport> stam_check(const FlowTrajectory& heat_traj, const std::string& input = "");

struct EntropyProduction {
    double integral_identity_residual;  // |dchi - (1/2) int beta (Phi* - 1)|
    double paper_form_residual;         // |dchi - (1/2) int beta Phi*|
};

// Trapezoid rule over the stored times.
EntropyProduction entropy_production_report(const FlowTrajectory& traj);

struct NamedMeasure {
    std::string name;
    GridMeasure measure;
};

// Twenty laws: SC(0, s2) for s2 in {0.25, 0.5, 0.75, 1, 1.5, 2, 3, 4},
// translated and rescaled semicircles, and two- and three-atom mixtures
// smoothed by free heat time 0.01.
std::vector<NamedMeasure> default_family(std::size_t n_cells = 512);

struct SuiteSummary {
    std::size_t total = 0;
    std::size_t holds = 0;
    std::size_t violations_as_stated = 0;
    std::size_t violations_relative = 0;
};

struct SuiteResult {
    std::vector<InequalityReport> reports;
    SuiteSummary summary;
    // Conjugate pairing int x Xi d mu per input, in input order.
    std::vector<double> pairings;
};

// LSI, Talagrand, HWI in both conventions plus the relative chain
// W2^2 <= rel_fisher for every measure, evaluated in parallel.
SuiteResult run_suite(const std::vector<NamedMeasure>& measures);

SuiteSummary summarize(const std::vector<InequalityReport>& reports);
// JSON array of {name, convention, lhs, rhs, holds, input}.
std::string reports_json(const std::vector<InequalityReport>& reports);
// {total, holds, violations_as_stated, violations_relative}
std::string summary_json(const SuiteSummary& s);

}  // namespace freeflow
