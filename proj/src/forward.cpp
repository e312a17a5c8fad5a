#include "freeflow/forward.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "freeflow/errors.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

using cplx = std::complex<double>;

std::string to_string(FlowMode mode) { return mode == FlowMode::ou ? "ou" : "heat"; }

void FlowTrajectory::validate() const {
    if (times.size() != measures.size() || times.size() != xi_fields.size()) {
        throw DomainError("trajectory times, measures and conjugate fields must have equal lengths");
    }
    if (times.empty()) throw DomainError("trajectory is empty");
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw DomainError("trajectory times must be strictly increasing");
    }
}

SemicircleParams ou_marginal_semicircle(double a, const Schedule& s, double t) {
    const double lambda = s.Lambda(t);
    return make_semicircle(std::exp(-0.5 * lambda) * a, -std::expm1(-lambda));
}

// ---------------------------------------------------------------------------
// Cauchy transforms and the subordination fixed point

namespace {

struct CauchyValue {
    cplx g;   // G_mu(w)
    cplx dg;  // G_mu'(w)
};

// Cauchy transform of a piecewise-constant density, exact per cell:
// G(w) = sum_k (rho_k - rho_{k-1}) log(w - e_k), G'(w) = sum_k (rho_k - rho_{k-1}) / (w - e_k).
class GridCauchy {
public:
    explicit GridCauchy(const GridMeasure& mu) {
        const auto rho = mu.density();
        const std::size_t n = rho.size();
        for (std::size_t k = 0; k <= n; ++k) {
            const double right = k < n ? rho[k] : 0.0;
            const double left = k > 0 ? rho[k - 1] : 0.0;
            if (right != left) {
                edges_.push_back(mu.edge(k));
                jumps_.push_back(right - left);
            }
        }
    }

    CauchyValue operator()(cplx w) const {
        cplx g = 0.0, dg = 0.0;
        for (std::size_t k = 0; k < edges_.size(); ++k) {
            const cplx d = w - edges_[k];
            g += jumps_[k] * std::log(d);
            dg += jumps_[k] / d;
        }
        return {g, dg};
    }

private:
    std::vector<double> edges_;
    std::vector<double> jumps_;
};

class AtomCauchy {
public:
    explicit AtomCauchy(const ParticleMeasure& p) : atoms_(p.atoms()) {}

    CauchyValue operator()(cplx w) const {
        cplx g = 0.0, dg = 0.0;
        for (const auto& a : atoms_) {
            const cplx inv = 1.0 / (w - a.position);
            g += a.weight * inv;
            dg -= a.weight * inv * inv;
        }
        return {g, dg};
    }

private:
    std::vector<ParticleMeasure::Atom> atoms_;
};

// Cauchy transform of SC(m, v) on the upper half-plane.
cplx semicircle_cauchy(cplx z, double m, double v) {
    const double r = 2.0 * std::sqrt(v);
    const cplx root = std::sqrt(z - m - r) * std::sqrt(z - m + r);
    return (z - m - root) / (2.0 * v);
}

// Newton iteration on w + s G_mu(w) - z = 0, falling back to a damped Picard
// step whenever Newton leaves the upper half-plane. The physical solution is
// the unique fixed point with Im w >= Im z.
template <class Cauchy>
cplx solve_subordination(const Cauchy& cauchy, cplx z, double s, cplx w, const SubordinationOptions& opts) {
    for (int it = 0; it < opts.max_iterations; ++it) {
        const auto [g, dg] = cauchy(w);
        const cplx residual = w + s * g - z;
        if (std::abs(residual) / s <= opts.tolerance) return g;
        cplx next = w - residual / (1.0 + s * dg);
        if (!std::isfinite(next.real()) || !std::isfinite(next.imag()) || next.imag() < 0.5 * z.imag()) {
            next = w + opts.damping * ((z - s * g) - w);
        }
        w = next;
    }
    std::ostringstream msg;
    msg << "subordination fixed point did not converge at x = " << std::setprecision(10) << z.real();
    throw NumericalError(msg.str());
}

template <class Cauchy>
GridMeasure convolve_on_grid(const Cauchy& cauchy, double m, double v, double s, double lo, double hi,
                             std::size_t n_cells, const SubordinationOptions& opts) {
    const double dx = (hi - lo) / static_cast<double>(n_cells);
    const double eps = opts.imag_offset_cells * dx;
    std::vector<double> density(n_cells);
    parallel_for(n_cells, [&](std::size_t i) {
        const cplx z(lo + (static_cast<double>(i) + 0.5) * dx, eps);
        const cplx w0 = z - s * semicircle_cauchy(z, m, v + s);
        const cplx g = solve_subordination(cauchy, z, s, w0, opts);
        density[i] = std::max(0.0, -g.imag() / std::numbers::pi);
    });
    return GridMeasure::normalized(lo, hi, std::move(density));
}

void check_convolution_args(double s, const SubordinationOptions& opts) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("semicircle variance must be positive");
    if (!(opts.damping > 0.0 && opts.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
    if (!(opts.imag_offset_cells > 0.0)) throw DomainError("imaginary offset must be positive");
}

}  // namespace

GridMeasure free_convolve_semicircle(const GridMeasure& mu, double s, const SubordinationOptions& opts) {
    check_convolution_args(s, opts);
    const double spread = 2.0 * std::sqrt(s);
    const double lo = mu.edge(mu.support_begin()) - spread;
    const double hi = mu.edge(mu.support_end()) + spread;
    const double pad = 0.02 * (hi - lo);
    const std::size_t n = opts.n_cells ? opts.n_cells : mu.n_cells();
    return convolve_on_grid(GridCauchy(mu), mean(mu), variance(mu), s, lo - pad, hi + pad, n, opts);
}

GridMeasure free_convolve_semicircle(const ParticleMeasure& atoms, double s, const SubordinationOptions& opts) {
    check_convolution_args(s, opts);
    const double spread = 2.0 * std::sqrt(s);
    const double lo = atoms.positions().front() - spread;
    const double hi = atoms.positions().back() + spread;
    const double pad = 0.02 * (hi - lo);
    const std::size_t n = opts.n_cells ? opts.n_cells : 512;
    return convolve_on_grid(AtomCauchy(atoms), mean(atoms), variance(atoms), s, lo - pad, hi + pad, n, opts);
}

GridMeasure ou_pushforward(const GridMeasure& mu0, const Schedule& s, double t, const SubordinationOptions& opts) {
    const double lambda = s.Lambda(t);
    if (!(lambda > 0.0)) throw DomainError("ou_pushforward requires t > 0");
    return free_convolve_semicircle(dilate(mu0, std::exp(-0.5 * lambda)), -std::expm1(-lambda), opts);
}

GridMeasure ou_pushforward(const ParticleMeasure& mu0, const Schedule& s, double t, const SubordinationOptions& opts) {
    const double lambda = s.Lambda(t);
    if (!(lambda > 0.0)) throw DomainError("ou_pushforward requires t > 0");
    return free_convolve_semicircle(dilate(mu0, std::exp(-0.5 * lambda)), -std::expm1(-lambda), opts);
}

GridMeasure exact_marginal(const ForwardSource& src, const Schedule& s, double t, FlowMode mode,
                           std::size_t n_cells) {
    if (!(src.smoothing >= 0.0)) throw DomainError("smoothing variance must be nonnegative");
    const double lambda = s.Lambda(t);
    const double scale = mode == FlowMode::ou ? std::exp(-0.5 * lambda) : 1.0;
    const double added = mode == FlowMode::ou ? -std::expm1(-lambda) : lambda;
    const double var = scale * scale * src.smoothing + added;
    SubordinationOptions opts;
    opts.n_cells = n_cells;

    if (const auto* sc = std::get_if<SemicircleParams>(&src.base)) {
        const auto p = make_semicircle(scale * sc->center, scale * scale * sc->variance + var);
        if (p.is_dirac()) throw DomainError("a Dirac mass has no grid density; add smoothing");
        return semicircle_to_grid(p, n_cells, 0.1 * p.radius());
    }
    if (const auto* atoms = std::get_if<ParticleMeasure>(&src.base)) {
        if (var == 0.0) throw DomainError("an atomic law has no grid density; add smoothing");
        return free_convolve_semicircle(dilate(*atoms, scale), var, opts);
    }
    const auto& grid = std::get<GridMeasure>(src.base);
    const auto dilated = scale == 1.0 ? grid : dilate(grid, scale);
    if (var == 0.0) return dilated;
    return free_convolve_semicircle(dilated, var, opts);
}

FlowTrajectory sample_trajectory(const ForwardSource& src, const Schedule& s, std::span<const double> times,
                                 FlowMode mode, std::size_t n_cells) {
    FlowTrajectory traj;
    traj.mode = mode;
    traj.schedule = s;
    traj.times.assign(times.begin(), times.end());
    for (double t : times) {
        traj.measures.push_back(exact_marginal(src, s, t, mode, n_cells));
        traj.xi_fields.push_back(conjugate_variable(traj.measures.back()));
    }
    traj.validate();
    return traj;
}

std::vector<double> graded_times(const Schedule& s, std::size_t n, double scale) {
    if (n < 2) throw DomainError("at least two intervals required");
    if (!(scale > 0.0)) throw DomainError("grading scale must be positive");
    const double T = s.horizon();
    const double total = s.Lambda(T);
    const double weight = std::log1p(total / scale) / total;
    auto phi = [&](double L) { return std::log1p(L / scale) + weight * L; };
    const double phi_total = phi(total);
    std::vector<double> out(n + 1);
    out[0] = 0.0;
    out[n] = T;
    for (std::size_t k = 1; k < n; ++k) {
        const double target = phi_total * static_cast<double>(k) / static_cast<double>(n);
        double lo = 0.0, hi = total;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (phi(mid) < target ? lo : hi) = mid;
        }
        out[k] = s.time_at_Lambda(0.5 * (lo + hi));
    }
    return out;
}

std::vector<double> uniform_times(const Schedule& s, std::size_t n) {
    if (n < 1) throw DomainError("at least one interval required");
    std::vector<double> out(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out[k] = s.horizon() * static_cast<double>(k) / static_cast<double>(n);
    out[n] = s.horizon();
    return out;
}

// ---------------------------------------------------------------------------
// Particle transport

std::vector<double> particle_hilbert(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> h(n, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    if (worker_count() > 1) {
        parallel_for(n, [&](std::size_t i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) acc += 1.0 / (x[i] - x[j]);
            }
            h[i] = acc * inv_n;
        });
        return h;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double inv = 1.0 / (x[i] - x[j]);
            acc += inv;
            h[j] -= inv;
        }
        h[i] += acc;
    }
    for (double& v : h) v *= inv_n;
    return h;
}

namespace {

void velocity(std::span<const double> x, double beta, FlowMode mode, std::vector<double>& v) {
    v = particle_hilbert(x);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] *= beta;
        if (mode == FlowMode::ou) v[i] -= 0.5 * beta * x[i];
    }
}

void check_ordering(std::span<const double> x, double t) {
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] - x[i - 1] >= 1e-12)) {
            std::ostringstream msg;
            msg << "particle collision near t = " << t << "; use a smaller step or more particles";
            throw NumericalError(msg.str());
        }
    }
}

double max_beta(const Schedule& s) {
    double b = 0.0;
    for (int k = 0; k <= 256; ++k) b = std::max(b, s.beta(s.horizon() * k / 256.0));
    return b;
}

}  // namespace

FlowTrajectory integrate_forward(const ParticleMeasure& particles0, const Schedule& s, const ForwardOptions& opts) {
    if (opts.n_steps < 10) throw DomainError("integrate_forward requires at least 10 steps");
    if (particles0.size() < 64) throw DomainError("integrate_forward requires at least 64 particles");
    if (opts.store_every < 1) throw DomainError("store_every must be positive");
    std::vector<double> x(particles0.positions().begin(), particles0.positions().end());
    check_ordering(x, 0.0);

    FlowTrajectory traj;
    traj.mode = opts.mode;
    traj.schedule = s;
    auto store = [&](double t) {
        traj.times.push_back(t);
        traj.measures.push_back(to_grid(ParticleMeasure(x), opts.n_cells));
        traj.xi_fields.push_back(conjugate_variable(traj.measures.back()));
    };

    const double dt = s.horizon() / static_cast<double>(opts.n_steps);
    std::vector<double> k1, k2, mid(x.size());
    store(0.0);
    for (std::size_t step = 0; step < opts.n_steps; ++step) {
        const double t = dt * static_cast<double>(step);
        velocity(x, s.beta(t), opts.mode, k1);
        for (std::size_t i = 0; i < x.size(); ++i) mid[i] = x[i] + 0.5 * dt * k1[i];
        check_ordering(mid, t + 0.5 * dt);
        velocity(mid, s.beta(t + 0.5 * dt), opts.mode, k2);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += dt * k2[i];
        const double t_next = step + 1 == opts.n_steps ? s.horizon() : t + dt;
        check_ordering(x, t_next);
        if ((step + 1) % opts.store_every == 0 || step + 1 == opts.n_steps) store(t_next);
    }
    traj.validate();
    return traj;
}

FlowTrajectory integrate_forward(const GridMeasure& mu0, const Schedule& s, const ForwardOptions& opts) {
    return integrate_forward(to_particles(mu0, opts.n_particles), s, opts);
}

std::size_t suggested_step_count(const ParticleMeasure& particles0, const Schedule& s, FlowMode mode) {
    const auto x = particles0.positions();
    const std::size_t n = x.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) acc += 1.0 / ((x[i] - x[j]) * (x[i] - x[j]));
        }
        worst = std::max(worst, 2.0 * acc / static_cast<double>(n));
    }
    // the ou flow tightens toward SC(0, 1), whose Gershgorin bound is 2N/3
    if (mode == FlowMode::ou) worst = std::max(worst, 2.0 * static_cast<double>(n) / 3.0) + 0.5;
    const double stiffness = max_beta(s) * worst;
    const auto steps = static_cast<std::size_t>(std::ceil(s.horizon() * stiffness / 1.8));
    return std::max<std::size_t>(steps, 10);
}

// ---------------------------------------------------------------------------
// Diagnostics

std::vector<TrajectoryRow> trajectory_rows(const FlowTrajectory& traj) {
    traj.validate();
    std::vector<TrajectoryRow> rows(traj.size());
    parallel_for(traj.size(), [&](std::size_t k) {
        const auto& mu = traj.measures[k];
        const auto [beta, lambda] = traj.schedule(traj.times[k]);
        const double le = log_energy(mu);
        const double m2 = moment(mu, 2);
        rows[k] = {traj.times[k],
                   beta,
                   lambda,
                   mean(mu),
                   variance(mu),
                   free_entropy_chi_from_log_energy(le),
                   free_fisher(mu, traj.xi_fields[k]),
                   0.5 * m2 - le};
    });
    return rows;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << "t,beta,Lambda,mean,variance,chi,fisher,free_energy\n" << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.t << ',' << r.beta << ',' << r.Lambda << ',' << r.mean << ',' << r.variance << ',' << r.chi << ','
            << r.fisher << ',' << r.free_energy << '\n';
    }
}

std::vector<DeBruijnPoint> de_bruijn_residual(const FlowTrajectory& traj) {
    traj.validate();
    if (traj.size() < 3) throw DomainError("de Bruijn residual needs at least three stored times");
    const std::size_t n = traj.size();
    std::vector<double> chi(n), fisher(n);
    parallel_for(n, [&](std::size_t k) {
        chi[k] = free_entropy_chi(traj.measures[k]);
        fisher[k] = free_fisher(traj.measures[k], traj.xi_fields[k]);
    });
    std::vector<DeBruijnPoint> out;
    out.reserve(n - 2);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double h1 = traj.times[k] - traj.times[k - 1];
        const double h2 = traj.times[k + 1] - traj.times[k];
        const double deriv =
            (chi[k + 1] * h1 * h1 - chi[k - 1] * h2 * h2 + chi[k] * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h1 + h2));
        const double beta = traj.schedule.beta(traj.times[k]);
        out.push_back({traj.times[k], deriv, 0.5 * beta * fisher[k], 0.5 * beta * (fisher[k] - 1.0)});
    }
    return out;
}

}  // namespace freeflow
