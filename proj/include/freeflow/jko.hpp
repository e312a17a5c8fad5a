#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "freeflow/measure.hpp"
#include "freeflow/schedule.hpp"

namespace freeflow {

struct JkoConfig {
    double tau = 0.05;
    std::size_t n_outer = 200;
    std::size_t n_particles = 256;
    // Max-norm of the N-scaled gradient of the proximal objective.
    double inner_tol = 1e-8;
    std::size_t inner_max_iters = 200;

    // Throws DomainError unless tau > 0, n_particles >= 16 and the inner
    // controls are positive.
    void validate() const;
};

// (1/2N) sum x_i^2 - (1/(N(N-1))) sum_{i != j} log|x_i - x_j|.
// Throws DomainError("log-energy singular") on coincident positions.
double discrete_free_energy(const ParticleMeasure& p);
double discrete_free_energy(std::span<const double> x);

// (1/(2 tau N)) sum (y_i - x_i)^2 + discrete_free_energy(y).
double prox_objective(std::span<const double> y, std::span<const double> x, double tau);

// Minimizer of prox_objective over ordered configurations, by Newton steps
// with Armijo backtracking started at x. The Hessian is the sum of
// (1/tau + 1) I and a weighted graph Laplacian, hence always positive
// definite. Throws NumericalError with the final gradient norm if
// inner_max_iters is exhausted.
ParticleMeasure prox_step(const ParticleMeasure& pk, const JkoConfig& cfg);

struct JkoRun {
    std::vector<ParticleMeasure> iterates;  // K + 1
    std::vector<double> energies;           // K + 1
    std::vector<double> transport_costs;    // K, W2^2(mu_{k+1}, mu_k)
    std::vector<bool> edi_ok;               // K
    double tau = 0.0;

    // sum_k (1/2 tau) W2^2 + F[mu_K] <= F[mu_0] + tol.
    bool summed_edi_holds(double tol = 1e-8) const;
    // Columns k,free_energy,transport_cost_sq,edi_ok; row 0 has empty
    // transport columns.
    void write_csv(std::ostream& out) const;
};

// Per-step EDI tolerance.
inline constexpr double kEdiTolerance = 1e-10;

JkoRun run_jko(const GridMeasure& mu0, const JkoConfig& cfg);
JkoRun run_jko(const ParticleMeasure& p0, const JkoConfig& cfg);

// Transport flow of the discrete free energy, i.e. the ou particle flow
// with beta = 2 and interaction normalized by N - 1, integrated in Lambda
// by explicit midpoint steps below the stability limit. Returns the
// configuration at each requested Lambda.
std::vector<ParticleMeasure> discrete_gradient_flow(const ParticleMeasure& p0, std::span<const double> lambdas);

// One JKO step of size tau advances the gradient flow of F by tau, which is
// the ou flow with beta = 2, so iterate k is matched with Lambda = 2 k tau.
// Returns the largest W2 between iterates and the transport flow of the same
// discrete energy at checkpoints (every `checkpoint_every` steps plus the
// last; 0 picks K/10). Sharing N isolates the time-discretization error.
// The schedule must reach Lambda = 2 K tau.
double jko_vs_flow(const GridMeasure& mu0, const JkoConfig& cfg, const Schedule& s, std::size_t checkpoint_every = 0);

// Same comparison against the exact continuum marginals; includes the
// O(log N / N) bias of the discrete energy.
double jko_vs_exact_flow(const GridMeasure& mu0, const JkoConfig& cfg, const Schedule& s,
                         std::size_t checkpoint_every = 0);

// Overloads reusing a completed run.
double jko_vs_flow(const JkoRun& run, const Schedule& s, std::size_t checkpoint_every = 0);
double jko_vs_exact_flow(const GridMeasure& mu0, const JkoRun& run, const Schedule& s,
                         std::size_t checkpoint_every = 0);

// Evolution-variational diagnostic: (1/2) W2^2(mu_k, SC(0,1)) per iterate,
// reported without a pass/fail contract.
std::vector<double> evi_series(const JkoRun& run);

}  // namespace freeflow
