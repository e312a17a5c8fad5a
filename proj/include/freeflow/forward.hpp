#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "freeflow/functionals.hpp"
#include "freeflow/measure.hpp"
#include "freeflow/schedule.hpp"

namespace freeflow {

// ou: v = -(beta/2) x + beta H mu (stationary law SC(0, 1)).
// heat: v = beta H mu, i.e. mu_t = mu_0 ⊞ SC(0, Lambda(t)).
enum class FlowMode { ou, heat };

std::string to_string(FlowMode mode);

struct FlowTrajectory {
    std::vector<double> times;
    std::vector<GridMeasure> measures;
    std::vector<ConjugateField> xi_fields;
    FlowMode mode = FlowMode::ou;
    Schedule schedule = Schedule::constant(1.0, 1.0);

    std::size_t size() const noexcept { return times.size(); }
    // Throws DomainError on inconsistent lengths or non-increasing times.
    void validate() const;
};

// ---------------------------------------------------------------------------
// Exact marginals

// Law of e^{-Lambda/2} a + free OU noise: SC(e^{-Lambda/2} a, 1 - e^{-Lambda}).
SemicircleParams ou_marginal_semicircle(double a, const Schedule& s, double t);

struct SubordinationOptions {
    double damping = 0.5;
    int max_iterations = 500;
    double tolerance = 1e-10;
    // Distance of the evaluation line above the real axis, as a fraction of
    // the output cell width.
    double imag_offset_cells = 1e-6;
    // Output resolution; 0 keeps the input cell count (512 for atoms).
    std::size_t n_cells = 0;
};

// mu ⊞ SC(0, s) from the subordination fixed point G(z) = G_mu(z - s G(z)),
// solved per output cell center and inverted by rho = -Im G / pi. The output
// grid covers the support of mu widened by 2 sqrt(s).
GridMeasure free_convolve_semicircle(const GridMeasure& mu, double s, const SubordinationOptions& opts = {});
// Atomic input; atoms are handled exactly through G_mu(z) = sum w / (z - a).
GridMeasure free_convolve_semicircle(const ParticleMeasure& atoms, double s, const SubordinationOptions& opts = {});

// mu_t = D_{e^{-Lambda/2}} mu_0 ⊞ SC(0, 1 - e^{-Lambda}).
GridMeasure ou_pushforward(const GridMeasure& mu0, const Schedule& s, double t, const SubordinationOptions& opts = {});
GridMeasure ou_pushforward(const ParticleMeasure& mu0, const Schedule& s, double t,
                           const SubordinationOptions& opts = {});

// Initial law of the form D(base) ⊞ SC(0, smoothing). The family is closed
// under both flows, so marginals stay cheap to evaluate exactly when the base
// is atomic or semicircular.
struct ForwardSource {
    std::variant<GridMeasure, ParticleMeasure, SemicircleParams> base;
    double smoothing = 0.0;
};

// Exact marginal at time t on a grid of n_cells.
GridMeasure exact_marginal(const ForwardSource& src, const Schedule& s, double t, FlowMode mode,
                           std::size_t n_cells = 512);

// Trajectory of exact marginals at the requested times.
FlowTrajectory sample_trajectory(const ForwardSource& src, const Schedule& s, std::span<const double> times,
                                 FlowMode mode, std::size_t n_cells = 512);

// n + 1 times on [0, T] that are dense where the law changes fast: equal
// increments of log(1 + Lambda/scale) + Lambda * log(1 + Lambda_T/scale)/Lambda_T.
std::vector<double> graded_times(const Schedule& s, std::size_t n, double scale);
std::vector<double> uniform_times(const Schedule& s, std::size_t n);

// ---------------------------------------------------------------------------
// Particle transport

struct ForwardOptions {
    std::size_t n_steps = 400;
    std::size_t n_particles = 2048;
    FlowMode mode = FlowMode::ou;
    std::size_t n_cells = 512;
    // Store every k-th step (the final step is always stored).
    std::size_t store_every = 1;
};

// Empirical Hilbert transform (1/N) sum_{j != i} 1/(x_i - x_j).
std::vector<double> particle_hilbert(std::span<const double> x);

// Midpoint integration of the characteristics of d_t mu + d_x(v mu) = 0 with
// v evaluated from the particles themselves. Throws NumericalError when two
// particles collide or cross.
FlowTrajectory integrate_forward(const GridMeasure& mu0, const Schedule& s, const ForwardOptions& opts);
FlowTrajectory integrate_forward(const ParticleMeasure& particles0, const Schedule& s, const ForwardOptions& opts);

// Uniform step count that keeps explicit midpoint stable for the stiffest
// nearest-neighbour interaction of the initial particles, with margin.
std::size_t suggested_step_count(const ParticleMeasure& particles0, const Schedule& s, FlowMode mode);

// ---------------------------------------------------------------------------
// Diagnostics

struct TrajectoryRow {
    double t, beta, Lambda, mean, variance, chi, fisher, free_energy;
};

std::vector<TrajectoryRow> trajectory_rows(const FlowTrajectory& traj);
// Columns t,beta,Lambda,mean,variance,chi,fisher,free_energy.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

struct DeBruijnPoint {
    double t;
    double dchi_dt;
    double half_beta_fisher;  // (beta/2) Phi*
    double ou_corrected;      // (beta/2) (Phi* - 1)
};

// Central differences of chi at interior stored times against the two
// entropy-production rates. In heat mode dchi_dt matches half_beta_fisher; in
// ou mode it matches ou_corrected, since the confinement drift removes
// (beta/2) * int x Xi dmu = beta/2.
std::vector<DeBruijnPoint> de_bruijn_residual(const FlowTrajectory& traj);

}  // namespace freeflow
