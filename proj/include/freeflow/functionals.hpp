#pragma once

#include <string>
#include <vector>

#include "freeflow/measure.hpp"

namespace freeflow {

// Conjugate variable (free score) sampled at the cell centers of the grid it
// was computed from. Xi = 2 H mu, where H is the principal-value Hilbert
// transform, so that Xi(x) = (x - m)/sigma^2 on SC(m, sigma^2).
struct ConjugateField {
    double x_min = 0.0;
    double x_max = 1.0;
    std::vector<double> values;
    // Set when the source density has an interior gap wider than ten cells;
    // principal-value accuracy degrades across such gaps.
    bool gap_warning = false;

    std::size_t n_cells() const noexcept { return values.size(); }
    double dx() const noexcept { return (x_max - x_min) / static_cast<double>(values.size()); }
    double center(std::size_t i) const noexcept { return x_min + (static_cast<double>(i) + 0.5) * dx(); }
    // Linear interpolation between cell centers, constant beyond the outer
    // centers.
    double at(double x) const;
};

// p.v. integral of d mu(y) / (x - y) by singularity subtraction against the
// linearly interpolated density at x. Outside [x_min, x_max] the integrand is
// regular and is summed directly.
double hilbert_transform(const GridMeasure& mu, double x);

ConjugateField conjugate_variable(const GridMeasure& mu);

// Pairing integral of x * Xi(x) against mu; equals one for any law with
// finite free Fisher information.
double conjugate_pairing(const GridMeasure& mu, const ConjugateField& xi);

// Double integral of log|x - y| d mu d mu. Each pair of cells uses the exact
// interaction of two uniform cell densities; the diagonal reduces to
// log(dx) - 3/2.
double log_energy(const GridMeasure& mu);

// Voiculescu free entropy: log_energy + 3/4 + log(2 pi)/2.
double free_entropy_chi(const GridMeasure& mu);
double free_entropy_chi_from_log_energy(double log_energy);

double free_fisher(const GridMeasure& mu);
double free_fisher(const GridMeasure& mu, const ConjugateField& xi);

// Integral of (Xi(x) - x)^2 d mu: Fisher information relative to the quadratic
// confinement, zero exactly at the standard semicircle.
double relative_fisher(const GridMeasure& mu, const ConjugateField& xi);

// F[mu] = (1/2) * second moment - log_energy; minimized by SC(0, 1).
double free_energy(const GridMeasure& mu);

// Gradient fields reported side by side: the first variation of F
// differentiated in x (x - Xi), and the additive form x/2 + Xi.
std::vector<double> free_energy_gradient(const GridMeasure& mu, const ConjugateField& xi);
std::vector<double> additive_entropy_gradient(const GridMeasure& mu, const ConjugateField& xi);

struct FunctionalReport {
    double log_energy = 0.0;
    double chi = 0.0;
    double fisher = 0.0;
    double free_energy = 0.0;
    double second_moment = 0.0;
    bool gap_warning = false;

    std::string to_json() const;
};

FunctionalReport evaluate_functionals(const GridMeasure& mu);

}  // namespace freeflow
