#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "freeflow/forward.hpp"

namespace freeflow {

// Reversed velocity at reverse time s (forward time T - s):
// -v(T - s, x) with H mu interpolated linearly in time between stored fields.
double reverse_velocity(const FlowTrajectory& traj, double s, double x);

struct ReverseOptions {
    std::size_t n_particles = 2048;
    // Midpoint substeps per stored trajectory interval.
    std::size_t substeps = 4;
    // Cells of the regridded path measures; 0 uses the trajectory's.
    std::size_t n_cells = 0;
};

struct ReversePathEntry {
    double s;
    GridMeasure measure;
    double w2_to_forward;  // against the stored forward marginal at T - s
};

struct ControlEnergy {
    double J;          // (1/2) int beta Phi* dt
    double delta_chi;  // chi(mu_T) - chi(mu_0)
    double slack;      // J - delta_chi
};

struct ReverseResult {
    GridMeasure reconstructed;
    double w2_to_target;
    std::vector<ReversePathEntry> path;
    ControlEnergy energy;

    // {w2_to_target, control_energy, delta_chi, slack}
    std::string to_json() const;
    // Columns s,mean,variance,w2_to_forward_marginal.
    void write_steps_csv(std::ostream& out) const;
};

// Transports the quantile particles of mu_T along the reversed
// characteristics, recording the regridded law at every stored time.
ReverseResult integrate_reverse(const FlowTrajectory& traj, const ReverseOptions& opts = {});

// Trapezoid rule over the stored times.
ControlEnergy control_energy(const FlowTrajectory& traj);

// Closed-form reverse drift for a point mass at a under the ou flow:
// (beta/2) [e^{-L}/(1 - e^{-L}) x - e^{-L/2} a / (1 - e^{-L})], L = Lambda(t).
double appendix_b_reverse_drift(double a, const Schedule& s, double t, double x);

// The three reverse drifts side by side at reverse time s.
struct DriftVariants {
    double probability_flow;  // reverse_velocity
    double stated_sde_drift;  // -(beta/2) x - beta Xi(x) at forward time T - s
    double closed_form;       // appendix_b_reverse_drift, requires a Dirac start at a
};

DriftVariants drift_variants(const FlowTrajectory& traj, double a, double s, double x);

}  // namespace freeflow
