#include "freeflow/jko.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "freeflow/errors.hpp"
#include "freeflow/forward.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

namespace {

bool strictly_ordered(std::span<const double> y) {
    for (std::size_t i = 1; i < y.size(); ++i) {
        if (!(y[i] > y[i - 1])) return false;
    }
    return true;
}

// N-scaled gradient of the proximal objective.
void prox_gradient(std::span<const double> y, std::span<const double> x, double tau, Eigen::VectorXd& g) {
    const std::size_t n = y.size();
    const double c = 2.0 / static_cast<double>(n - 1);
    parallel_for(n, [&](std::size_t i) {
        double h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) h += 1.0 / (y[i] - y[j]);
        }
        g[static_cast<Eigen::Index>(i)] = (y[i] - x[i]) / tau + y[i] - c * h;
    });
}

void prox_hessian(std::span<const double> y, double tau, Eigen::MatrixXd& H) {
    const std::size_t n = y.size();
    const double c = 2.0 / static_cast<double>(n - 1);
    parallel_for(n, [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        double diag = 1.0 / tau + 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = y[i] - y[j];
            const double w = c / (d * d);
            H(ii, static_cast<Eigen::Index>(j)) = -w;
            diag += w;
        }
        H(ii, ii) = diag;
    });
}

}  // namespace

void JkoConfig::validate() const {
    if (!(tau > 0.0)) throw DomainError("tau must be positive");
    if (n_particles < 16) throw DomainError("n_particles must be at least 16");
    if (!(inner_tol > 0.0)) throw DomainError("inner_tol must be positive");
    if (inner_max_iters < 1) throw DomainError("inner_max_iters must be positive");
}

double discrete_free_energy(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) throw DomainError("discrete free energy needs at least two particles");
    double quad = 0.0;
    for (double v : x) quad += v * v;
    std::vector<double> rows(n, 0.0);
    bool singular = false;
    parallel_for(n, [&](std::size_t i) {
        double r = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = std::abs(x[i] - x[j]);
            if (d == 0.0) {
                singular = true;
                return;
            }
            r += std::log(d);
        }
        rows[i] = r;
    });
    if (singular) throw DomainError("log-energy singular");
    double pairs = 0.0;
    for (double r : rows) pairs += r;
    const double dn = static_cast<double>(n);
    return quad / (2.0 * dn) - 2.0 * pairs / (dn * (dn - 1.0));
}

double discrete_free_energy(const ParticleMeasure& p) { return discrete_free_energy(p.positions()); }

double prox_objective(std::span<const double> y, std::span<const double> x, double tau) {
    if (y.size() != x.size()) throw DomainError("configurations differ in size");
    double t = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) t += (y[i] - x[i]) * (y[i] - x[i]);
    return t / (2.0 * tau * static_cast<double>(y.size())) + discrete_free_energy(y);
}

ParticleMeasure prox_step(const ParticleMeasure& pk, const JkoConfig& cfg) {
    cfg.validate();
    const auto x = pk.positions();
    if (!strictly_ordered(x)) throw DomainError("prox step needs distinct positions");
    const std::size_t n = x.size();
    const auto ni = static_cast<Eigen::Index>(n);
    std::vector<double> y(x.begin(), x.end());
    std::vector<double> trial(n);
    Eigen::VectorXd g(ni), g_trial(ni);
    Eigen::MatrixXd H(ni, ni);

    double obj = prox_objective(y, x, cfg.tau);
    prox_gradient(y, x, cfg.tau, g);
    double gnorm = g.lpNorm<Eigen::Infinity>();
    for (std::size_t it = 0; it < cfg.inner_max_iters; ++it) {
        if (gnorm <= cfg.inner_tol) return ParticleMeasure(std::move(y));
        prox_hessian(y, cfg.tau, H);
        Eigen::LLT<Eigen::MatrixXd> llt(H);
        Eigen::VectorXd d = llt.info() == Eigen::Success ? Eigen::VectorXd(-llt.solve(g)) : Eigen::VectorXd(-g);
        // objective and gradient carry the same 1/N scale difference
        const double slope = g.dot(d) / static_cast<double>(n);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-12) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = y[i] + step * d[static_cast<Eigen::Index>(i)];
            if (strictly_ordered(trial)) {
                const double o = prox_objective(trial, x, cfg.tau);
                bool ok = o <= obj + 1e-4 * step * slope;
                if (!ok && o <= obj + 1e-14 * std::max(1.0, std::abs(obj))) {
                    // decrease is below roundoff; accept if the gradient shrinks
                    prox_gradient(trial, x, cfg.tau, g_trial);
                    ok = g_trial.lpNorm<Eigen::Infinity>() < gnorm;
                }
                if (ok) {
                    y.swap(trial);
                    obj = std::min(o, obj);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
        prox_gradient(y, x, cfg.tau, g);
        gnorm = g.lpNorm<Eigen::Infinity>();
    }
    if (gnorm <= cfg.inner_tol) return ParticleMeasure(std::move(y));
    std::ostringstream msg;
    msg << "prox step did not converge: gradient max-norm " << gnorm << " after " << cfg.inner_max_iters
        << " iterations";
    throw NumericalError(msg.str());
}

bool JkoRun::summed_edi_holds(double tol) const {
    double lhs = energies.back();
    for (double c : transport_costs) lhs += c / (2.0 * tau);
    return lhs <= energies.front() + tol;
}

void JkoRun::write_csv(std::ostream& out) const {
    out << "k,free_energy,transport_cost_sq,edi_ok\n" << std::setprecision(17);
    for (std::size_t k = 0; k < energies.size(); ++k) {
        out << k << ',' << energies[k] << ',';
        if (k == 0) {
            out << ",\n";
        } else {
            out << transport_costs[k - 1] << ',' << (edi_ok[k - 1] ? "true" : "false") << '\n';
        }
    }
}

JkoRun run_jko(const ParticleMeasure& p0, const JkoConfig& cfg) {
    cfg.validate();
    JkoRun run;
    run.tau = cfg.tau;
    run.iterates.push_back(p0);
    run.energies.push_back(discrete_free_energy(p0));
    for (std::size_t k = 0; k < cfg.n_outer; ++k) {
        auto next = prox_step(run.iterates.back(), cfg);
        const double cost = std::pow(w2(next, run.iterates.back()), 2);
        const double e = discrete_free_energy(next);
        run.edi_ok.push_back(e + cost / (2.0 * cfg.tau) <= run.energies.back() + kEdiTolerance);
        run.transport_costs.push_back(cost);
        run.energies.push_back(e);
        run.iterates.push_back(std::move(next));
    }
    return run;
}

JkoRun run_jko(const GridMeasure& mu0, const JkoConfig& cfg) {
    cfg.validate();
    return run_jko(to_particles(mu0, cfg.n_particles), cfg);
}

namespace {

// dy_i/dLambda = (1/2)(-y_i + (2/(N-1)) sum_j 1/(y_i - y_j)).
void discrete_velocity(std::span<const double> y, std::vector<double>& v) {
    const std::size_t n = y.size();
    const double c = 2.0 / static_cast<double>(n - 1);
    parallel_for(n, [&](std::size_t i) {
        double h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) h += 1.0 / (y[i] - y[j]);
        }
        v[i] = 0.5 * (-y[i] + c * h);
    });
}

// Gershgorin bound on the Jacobian spectrum of discrete_velocity.
double stiffness(std::span<const double> y) {
    const std::size_t n = y.size();
    const double c = 2.0 / static_cast<double>(n - 1);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) r += 1.0 / ((y[i] - y[j]) * (y[i] - y[j]));
        }
        worst = std::max(worst, r);
    }
    return 0.5 * (1.0 + 2.0 * c * worst);
}

std::vector<std::size_t> checkpoints(std::size_t K, std::size_t every) {
    if (!every) every = std::max<std::size_t>(1, K / 10);
    std::vector<std::size_t> checks;
    for (std::size_t k = every; k < K; k += every) checks.push_back(k);
    checks.push_back(K);
    return checks;
}

void check_horizon(const JkoConfig& cfg, const Schedule& s) {
    const double target = 2.0 * static_cast<double>(cfg.n_outer) * cfg.tau;
    if (s.Lambda(s.horizon()) < target * (1.0 - 1e-9)) {
        throw DomainError("schedule horizon is shorter than the JKO elapsed time");
    }
}

void check_horizon(const JkoRun& run, const Schedule& s) {
    const double target = 2.0 * static_cast<double>(run.transport_costs.size()) * run.tau;
    if (s.Lambda(s.horizon()) < target * (1.0 - 1e-9)) {
        throw DomainError("schedule horizon is shorter than the JKO elapsed time");
    }
}

}  // namespace

std::vector<ParticleMeasure> discrete_gradient_flow(const ParticleMeasure& p0, std::span<const double> lambdas) {
    std::vector<double> y(p0.positions().begin(), p0.positions().end());
    if (!strictly_ordered(y)) throw DomainError("gradient flow needs distinct positions");
    std::vector<double> v(y.size()), mid(y.size());
    std::vector<ParticleMeasure> out;
    double lam = 0.0;
    for (double target : lambdas) {
        if (target < lam) throw DomainError("Lambda targets must be nondecreasing and nonnegative");
        while (lam < target) {
            const double h = std::min(target - lam, 1.8 / stiffness(y));
            discrete_velocity(y, v);
            for (std::size_t i = 0; i < y.size(); ++i) mid[i] = y[i] + 0.5 * h * v[i];
            discrete_velocity(mid, v);
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * v[i];
            if (!strictly_ordered(y)) throw NumericalError("particle collision in the discrete gradient flow");
            lam = target - lam <= h ? target : lam + h;
        }
        out.emplace_back(y);
    }
    return out;
}

double jko_vs_flow(const JkoRun& run, const Schedule& s, std::size_t checkpoint_every) {
    check_horizon(run, s);
    const auto checks = checkpoints(run.transport_costs.size(), checkpoint_every);
    std::vector<double> lambdas;
    for (auto k : checks) lambdas.push_back(2.0 * static_cast<double>(k) * run.tau);
    const auto flow = discrete_gradient_flow(run.iterates.front(), lambdas);
    double worst = 0.0;
    for (std::size_t c = 0; c < checks.size(); ++c) worst = std::max(worst, w2(run.iterates[checks[c]], flow[c]));
    return worst;
}

double jko_vs_exact_flow(const GridMeasure& mu0, const JkoRun& run, const Schedule& s, std::size_t checkpoint_every) {
    check_horizon(run, s);
    const auto checks = checkpoints(run.transport_costs.size(), checkpoint_every);
    const ForwardSource src{mu0, 0.0};
    std::vector<double> d(checks.size());
    parallel_for(checks.size(), [&](std::size_t c) {
        const std::size_t k = checks[c];
        const double lam = std::min(2.0 * static_cast<double>(k) * run.tau, s.Lambda(s.horizon()));
        d[c] = w2(run.iterates[k], exact_marginal(src, s, s.time_at_Lambda(lam), FlowMode::ou, mu0.n_cells()));
    });
    return *std::max_element(d.begin(), d.end());
}

double jko_vs_flow(const GridMeasure& mu0, const JkoConfig& cfg, const Schedule& s, std::size_t checkpoint_every) {
    cfg.validate();
    check_horizon(cfg, s);
    return jko_vs_flow(run_jko(mu0, cfg), s, checkpoint_every);
}

double jko_vs_exact_flow(const GridMeasure& mu0, const JkoConfig& cfg, const Schedule& s,
                         std::size_t checkpoint_every) {
    cfg.validate();
    check_horizon(cfg, s);
    return jko_vs_exact_flow(mu0, run_jko(mu0, cfg), s, checkpoint_every);
}

std::vector<double> evi_series(const JkoRun& run) {
    const auto sc = semicircle_to_grid(make_semicircle(0.0, 1.0), 2048, 0.0);
    std::vector<double> out;
    out.reserve(run.iterates.size());
    for (const auto& p : run.iterates) out.push_back(0.5 * std::pow(w2(p, sc), 2));
    return out;
}

}  // namespace freeflow
