#include "freeflow/measure.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "freeflow/errors.hpp"

namespace freeflow {

namespace {

// Quantile function as a list of pieces on [u0, u1] that are linear in u.
struct QuantilePiece {
    double u0, u1;
    double q0, q1;
};

std::vector<QuantilePiece> quantile_pieces(const GridMeasure& mu) {
    std::vector<QuantilePiece> pieces;
    const auto cdf = mu.cdf();
    for (std::size_t i = 0; i < mu.n_cells(); ++i) {
        if (cdf[i + 1] > cdf[i]) pieces.push_back({cdf[i], cdf[i + 1], mu.edge(i), mu.edge(i + 1)});
    }
    pieces.front().u0 = 0.0;
    pieces.back().u1 = 1.0;
    return pieces;
}

std::vector<QuantilePiece> quantile_pieces(const ParticleMeasure& mu) {
    std::vector<QuantilePiece> pieces;
    const auto n = static_cast<double>(mu.size());
    pieces.reserve(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        pieces.push_back({static_cast<double>(i) / n, static_cast<double>(i + 1) / n, mu[i], mu[i]});
    }
    pieces.back().u1 = 1.0;
    return pieces;
}

double eval_piece(const QuantilePiece& p, double u) {
    if (p.u1 <= p.u0) return p.q0;
    const double s = (u - p.u0) / (p.u1 - p.u0);
    return p.q0 + s * (p.q1 - p.q0);
}

// Integral of (Q_a - Q_b)^2 over [0, 1]; the integrand is quadratic on every
// merged interval so Simpson's rule is exact there.
double quantile_distance_sq(const std::vector<QuantilePiece>& a, const std::vector<QuantilePiece>& b) {
    std::size_t ia = 0, ib = 0;
    double u = 0.0;
    double total = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double hi = std::min(a[ia].u1, b[ib].u1);
        if (hi > u) {
            const double mid = 0.5 * (u + hi);
            const double d0 = eval_piece(a[ia], u) - eval_piece(b[ib], u);
            const double dm = eval_piece(a[ia], mid) - eval_piece(b[ib], mid);
            const double d1 = eval_piece(a[ia], hi) - eval_piece(b[ib], hi);
            total += (hi - u) * (d0 * d0 + 4.0 * dm * dm + d1 * d1) / 6.0;
            u = hi;
        }
        if (a[ia].u1 <= u) ++ia;
        if (ib < b.size() && b[ib].u1 <= u) ++ib;
    }
    return std::max(total, 0.0);
}

double int_pow(double x, unsigned k) {
    double r = 1.0;
    for (unsigned i = 0; i < k; ++i) r *= x;
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// GridMeasure

GridMeasure::GridMeasure(double x_min, double x_max, std::vector<double> density)
    : x_min_(x_min), x_max_(x_max), density_(std::move(density)) {
    if (!(x_min_ < x_max_) || !std::isfinite(x_min_) || !std::isfinite(x_max_)) {
        throw DomainError("grid measure requires finite x_min < x_max");
    }
    if (density_.size() < kMinCells) throw DomainError("grid measure requires at least 8 cells");
    for (double v : density_) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("grid density must be finite and nonnegative");
    }
    if (std::abs(mass() - 1.0) > kMassTolerance) {
        throw DomainError("grid measure is not normalized (mass " + std::to_string(mass()) + ")");
    }
}

GridMeasure GridMeasure::normalized(double x_min, double x_max, std::vector<double> density) {
    if (density.empty()) throw DomainError("grid measure requires at least 8 cells");
    const double dx = (x_max - x_min) / static_cast<double>(density.size());
    double total = 0.0;
    for (double v : density) total += v;
    total *= dx;
    if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("cannot normalize a density with zero mass");
    for (double& v : density) v /= total;
    return GridMeasure(x_min, x_max, std::move(density));
}

double GridMeasure::mass() const noexcept {
    return std::accumulate(density_.begin(), density_.end(), 0.0) * dx();
}

std::vector<double> GridMeasure::cdf() const {
    std::vector<double> out(density_.size() + 1, 0.0);
    const double h = dx();
    for (std::size_t i = 0; i < density_.size(); ++i) out[i + 1] = out[i] + density_[i] * h;
    const double total = out.back();
    for (double& v : out) v /= total;
    return out;
}

std::size_t GridMeasure::support_begin() const noexcept {
    std::size_t i = 0;
    while (i < density_.size() && density_[i] <= 0.0) ++i;
    return i;
}

std::size_t GridMeasure::support_end() const noexcept {
    std::size_t i = density_.size();
    while (i > 0 && density_[i - 1] <= 0.0) --i;
    return i;
}

// ---------------------------------------------------------------------------
// ParticleMeasure

ParticleMeasure::ParticleMeasure(std::vector<double> positions) : positions_(std::move(positions)) {
    if (positions_.size() < 2) throw DomainError("particle measure requires at least 2 particles");
    for (double x : positions_) {
        if (!std::isfinite(x)) throw DomainError("particle positions must be finite");
    }
    if (!std::is_sorted(positions_.begin(), positions_.end())) {
        throw DomainError("particle positions must be sorted nondecreasing");
    }
}

std::vector<ParticleMeasure::Atom> ParticleMeasure::atoms() const {
    std::vector<Atom> out;
    const double w = 1.0 / static_cast<double>(positions_.size());
    for (double x : positions_) {
        if (!out.empty() && out.back().position == x) {
            out.back().weight += w;
        } else {
            out.push_back({x, w});
        }
    }
    return out;
}

ParticleMeasure ParticleMeasure::from_atoms(std::span<const Atom> atoms, std::size_t resolution) {
    if (atoms.empty()) throw DomainError("at least one atom required");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.weight > 0.0)) throw DomainError("atom weights must be positive");
        total += a.weight;
    }
    std::vector<double> positions;
    for (const auto& a : atoms) {
        const auto copies = static_cast<std::size_t>(std::llround(a.weight / total * static_cast<double>(resolution)));
        positions.insert(positions.end(), std::max<std::size_t>(copies, 1), a.position);
    }
    if (positions.size() < 2) positions.push_back(positions.front());
    std::sort(positions.begin(), positions.end());
    return ParticleMeasure(std::move(positions));
}

// ---------------------------------------------------------------------------
// Semicircle family

double SemicircleParams::radius() const { return 2.0 * std::sqrt(variance); }

SemicircleParams make_semicircle(double center, double variance) {
    if (!(variance >= 0.0) || !std::isfinite(variance) || !std::isfinite(center)) {
        throw DomainError("semicircle requires finite center and nonnegative variance");
    }
    return {center, variance};
}

double semicircle_density(const SemicircleParams& p, double x) {
    if (!(p.variance > 0.0)) throw DomainError("degenerate semicircle has no density");
    const double r2 = 4.0 * p.variance - (x - p.center) * (x - p.center);
    if (r2 <= 0.0) return 0.0;
    return std::sqrt(r2) / (2.0 * std::numbers::pi * p.variance);
}

GridMeasure semicircle_to_grid(const SemicircleParams& p, std::size_t n_cells, double padding) {
    if (!(p.variance > 0.0)) throw DomainError("degenerate semicircle has no density");
    if (!(padding >= 0.0)) throw DomainError("padding must be nonnegative");
    const double r = p.radius();
    const double lo = p.center - r - padding;
    const double hi = p.center + r + padding;
    const double dx = (hi - lo) / static_cast<double>(n_cells);
    std::vector<double> density(n_cells);
    for (std::size_t i = 0; i < n_cells; ++i) {
        density[i] = semicircle_density(p, lo + (static_cast<double>(i) + 0.5) * dx);
    }
    return GridMeasure::normalized(lo, hi, std::move(density));
}

// ---------------------------------------------------------------------------
// Moments

double moment(const GridMeasure& mu, unsigned k) {
    if (k > 12) throw DomainError("moment order must be at most 12");
    double s = 0.0;
    const auto rho = mu.density();
    for (std::size_t i = 0; i < rho.size(); ++i) s += int_pow(mu.center(i), k) * rho[i];
    return s * mu.dx();
}

double moment(const ParticleMeasure& mu, unsigned k) {
    if (k > 12) throw DomainError("moment order must be at most 12");
    double s = 0.0;
    for (double x : mu.positions()) s += int_pow(x, k);
    return s / static_cast<double>(mu.size());
}

double mean(const GridMeasure& mu) { return moment(mu, 1); }
double mean(const ParticleMeasure& mu) { return moment(mu, 1); }

double variance(const GridMeasure& mu) {
    const double m = mean(mu);
    double s = 0.0;
    const auto rho = mu.density();
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double d = mu.center(i) - m;
        s += d * d * rho[i];
    }
    return s * mu.dx();
}

double variance(const ParticleMeasure& mu) {
    const double m = mean(mu);
    double s = 0.0;
    for (double x : mu.positions()) s += (x - m) * (x - m);
    return s / static_cast<double>(mu.size());
}

// ---------------------------------------------------------------------------
// Conversions

ParticleMeasure to_particles(const GridMeasure& mu, std::size_t n) {
    if (n < 2) throw DomainError("to_particles requires N >= 2");
    if (std::abs(mu.mass() - 1.0) > GridMeasure::kMassTolerance) throw DomainError("measure is not normalized");
    const auto cdf = mu.cdf();
    std::vector<double> out(n);
    std::size_t cell = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        while (cell + 1 < mu.n_cells() && cdf[cell + 1] < u) ++cell;
        const double width = cdf[cell + 1] - cdf[cell];
        const double s = width > 0.0 ? std::clamp((u - cdf[cell]) / width, 0.0, 1.0) : 0.5;
        out[i] = mu.edge(cell) + s * mu.dx();
    }
    std::sort(out.begin(), out.end());
    return ParticleMeasure(std::move(out));
}

GridMeasure to_grid(const ParticleMeasure& p, double x_min, double x_max, std::size_t n_cells) {
    const auto x = p.positions();
    const std::size_t n = x.size();
    if (x.back() == x.front()) throw DomainError("cannot regrid a Dirac mass");
    const double nn = static_cast<double>(n);

    // Knots of the piecewise-linear CDF.
    std::vector<double> kx;
    std::vector<double> ku;
    kx.reserve(n + 2);
    ku.reserve(n + 2);
    kx.push_back(x[0] - 0.5 * (x[1] - x[0]));
    ku.push_back(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        kx.push_back(x[i]);
        ku.push_back((static_cast<double>(i) + 0.5) / nn);
    }
    kx.push_back(x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]));
    ku.push_back(1.0);

    auto cdf_at = [&](double e) {
        // right-continuous: vertical knots resolve to the upper value
        const auto it = std::upper_bound(kx.begin(), kx.end(), e);
        if (it == kx.begin()) return 0.0;
        if (it == kx.end()) return 1.0;
        const auto j = static_cast<std::size_t>(it - kx.begin());
        const double s = (e - kx[j - 1]) / (kx[j] - kx[j - 1]);
        return ku[j - 1] + s * (ku[j] - ku[j - 1]);
    };

    const double dx = (x_max - x_min) / static_cast<double>(n_cells);
    std::vector<double> density(n_cells);
    double prev = cdf_at(x_min);
    for (std::size_t i = 0; i < n_cells; ++i) {
        const double next = cdf_at(x_min + static_cast<double>(i + 1) * dx);
        density[i] = std::max(next - prev, 0.0) / dx;
        prev = next;
    }
    return GridMeasure::normalized(x_min, x_max, std::move(density));
}

GridMeasure to_grid(const ParticleMeasure& p, std::size_t n_cells, double padding_fraction) {
    const auto x = p.positions();
    const std::size_t n = x.size();
    const double lo = x[0] - 0.5 * (x[1] - x[0]);
    const double hi = x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]);
    const double pad = padding_fraction * (hi - lo);
    return to_grid(p, lo - pad, hi + pad, n_cells);
}

GridMeasure translate(const GridMeasure& mu, double shift) {
    return GridMeasure(mu.x_min() + shift, mu.x_max() + shift, {mu.density().begin(), mu.density().end()});
}

ParticleMeasure translate(const ParticleMeasure& mu, double shift) {
    std::vector<double> x(mu.positions().begin(), mu.positions().end());
    for (double& v : x) v += shift;
    return ParticleMeasure(std::move(x));
}

GridMeasure dilate(const GridMeasure& mu, double factor) {
    if (!(factor > 0.0)) throw DomainError("dilation factor must be positive");
    std::vector<double> rho(mu.density().begin(), mu.density().end());
    for (double& v : rho) v /= factor;
    return GridMeasure::normalized(mu.x_min() * factor, mu.x_max() * factor, std::move(rho));
}

ParticleMeasure dilate(const ParticleMeasure& mu, double factor) {
    if (!(factor > 0.0)) throw DomainError("dilation factor must be positive");
    std::vector<double> x(mu.positions().begin(), mu.positions().end());
    for (double& v : x) v *= factor;
    return ParticleMeasure(std::move(x));
}

// ---------------------------------------------------------------------------
// Wasserstein distance

double w2(const GridMeasure& mu, const GridMeasure& nu) {
    return std::sqrt(quantile_distance_sq(quantile_pieces(mu), quantile_pieces(nu)));
}
double w2(const ParticleMeasure& mu, const ParticleMeasure& nu) {
    return std::sqrt(quantile_distance_sq(quantile_pieces(mu), quantile_pieces(nu)));
}
double w2(const GridMeasure& mu, const ParticleMeasure& nu) {
    return std::sqrt(quantile_distance_sq(quantile_pieces(mu), quantile_pieces(nu)));
}
double w2(const ParticleMeasure& mu, const GridMeasure& nu) {
    return std::sqrt(quantile_distance_sq(quantile_pieces(mu), quantile_pieces(nu)));
}

// ---------------------------------------------------------------------------
// CSV

void write_csv(std::ostream& out, const GridMeasure& mu) {
    out << "x,density\n" << std::setprecision(17);
    for (std::size_t i = 0; i < mu.n_cells(); ++i) out << mu.center(i) << ',' << mu.density()[i] << '\n';
}

void write_csv(std::ostream& out, const ParticleMeasure& mu) {
    out << "position\n" << std::setprecision(17);
    for (double x : mu.positions()) out << x << '\n';
}

GridMeasure read_grid_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,density", 0) != 0) {
        throw DomainError("grid CSV must start with header x,density");
    }
    std::vector<double> xs, rho;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        double x = 0.0, d = 0.0;
        char comma = 0;
        if (!(row >> x >> comma >> d) || comma != ',') throw DomainError("malformed grid CSV row: " + line);
        xs.push_back(x);
        rho.push_back(d);
    }
    if (xs.size() < GridMeasure::kMinCells) throw DomainError("grid CSV has too few rows");
    const double dx = (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1);
    return GridMeasure::normalized(xs.front() - 0.5 * dx, xs.back() + 0.5 * dx, std::move(rho));
}

ParticleMeasure read_particle_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("position", 0) != 0) {
        throw DomainError("particle CSV must start with header position");
    }
    std::vector<double> xs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        xs.push_back(std::stod(line));
    }
    std::sort(xs.begin(), xs.end());
    return ParticleMeasure(std::move(xs));
}

}  // namespace freeflow
