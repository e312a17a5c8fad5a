#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace freeflow {

// Probability density sampled at the centers of a uniform grid on
// [x_min, x_max]. Values are nonnegative and integrate to one.
class GridMeasure {
public:
    static constexpr double kMassTolerance = 1e-9;
    static constexpr std::size_t kMinCells = 8;

    // Validates every invariant; throws DomainError if the density does not
    // already carry unit mass.
    GridMeasure(double x_min, double x_max, std::vector<double> density);

    // Rescales `density` to unit mass before validating.
    static GridMeasure normalized(double x_min, double x_max, std::vector<double> density);

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    std::size_t n_cells() const noexcept { return density_.size(); }
    double dx() const noexcept { return (x_max_ - x_min_) / static_cast<double>(density_.size()); }
    double center(std::size_t i) const noexcept { return x_min_ + (static_cast<double>(i) + 0.5) * dx(); }
    double edge(std::size_t i) const noexcept { return x_min_ + static_cast<double>(i) * dx(); }
    std::span<const double> density() const noexcept { return density_; }
    double mass() const noexcept;

    // Cell-edge cumulative distribution: n_cells + 1 values from 0 to 1.
    std::vector<double> cdf() const;

    // First and last cell index with positive density.
    std::size_t support_begin() const noexcept;
    std::size_t support_end() const noexcept;  // one past the last

private:
    double x_min_;
    double x_max_;
    std::vector<double> density_;
};

// Equal-weight atoms at sorted positions. Repeated positions encode atoms of
// larger (rational) weight.
class ParticleMeasure {
public:
    explicit ParticleMeasure(std::vector<double> positions);

    std::size_t size() const noexcept { return positions_.size(); }
    std::span<const double> positions() const noexcept { return positions_; }
    double operator[](std::size_t i) const noexcept { return positions_[i]; }

    // Distinct positions with their total weights.
    struct Atom {
        double position;
        double weight;
    };
    std::vector<Atom> atoms() const;

    // Builds a measure from weighted atoms by repeating each position
    // round(weight * resolution) times.
    static ParticleMeasure from_atoms(std::span<const Atom> atoms, std::size_t resolution = 1000);

private:
    std::vector<double> positions_;
};

// Semicircle law with center m and variance sigma^2. Zero variance is the
// Dirac mass at the center.
struct SemicircleParams {
    double center = 0.0;
    double variance = 1.0;

    double radius() const;  // 2 sigma
    bool is_dirac() const noexcept { return variance == 0.0; }
};

SemicircleParams make_semicircle(double center, double variance);

double semicircle_density(const SemicircleParams& p, double x);

// Grid on [m - 2 sigma - padding, m + 2 sigma + padding] carrying the
// cell-centered density, renormalized to unit mass.
GridMeasure semicircle_to_grid(const SemicircleParams& p, std::size_t n_cells, double padding = 0.5);

double moment(const GridMeasure& mu, unsigned k);
double moment(const ParticleMeasure& mu, unsigned k);
double mean(const GridMeasure& mu);
double variance(const GridMeasure& mu);
double mean(const ParticleMeasure& mu);
double variance(const ParticleMeasure& mu);

// Quantiles at levels (i - 1/2)/N of the piecewise-linear cell-edge CDF.
ParticleMeasure to_particles(const GridMeasure& mu, std::size_t n);

// Inverse of to_particles: the CDF interpolates linearly through
// (x_i, (i - 1/2)/N), reaching 0 and 1 half a spacing beyond the extreme
// particles, and is integrated over each cell. A measure supported on a single
// point cannot be regridded.
GridMeasure to_grid(const ParticleMeasure& p, double x_min, double x_max, std::size_t n_cells);
GridMeasure to_grid(const ParticleMeasure& p, std::size_t n_cells, double padding_fraction = 0.02);

// Pushforward under x -> x + shift.
GridMeasure translate(const GridMeasure& mu, double shift);
ParticleMeasure translate(const ParticleMeasure& mu, double shift);
// Pushforward under x -> factor * x, factor > 0. Grid coordinates are scaled
// exactly; no resampling.
GridMeasure dilate(const GridMeasure& mu, double factor);
ParticleMeasure dilate(const ParticleMeasure& mu, double factor);

// Monotone-transport 2-Wasserstein distance between one-dimensional laws,
// computed exactly from the piecewise-linear (grid) or piecewise-constant
// (particle) quantile functions.
double w2(const GridMeasure& mu, const GridMeasure& nu);
double w2(const ParticleMeasure& mu, const ParticleMeasure& nu);
double w2(const GridMeasure& mu, const ParticleMeasure& nu);
double w2(const ParticleMeasure& mu, const GridMeasure& nu);

// CSV with header `x,density` (or `position`), 17 significant digits.
void write_csv(std::ostream& out, const GridMeasure& mu);
void write_csv(std::ostream& out, const ParticleMeasure& mu);
GridMeasure read_grid_csv(std::istream& in);
ParticleMeasure read_particle_csv(std::istream& in);

}  // namespace freeflow
