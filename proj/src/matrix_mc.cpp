#include "freeflow/matrix_mc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "freeflow/errors.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

namespace {

void check_size(std::size_t N) {
    if (N < 2) throw DomainError("matrix dimension must be at least 2");
}

// Adds scale * (unit-variance GUE) to X in place, drawing entries row-major
// over the upper triangle.
void add_gue(HermitianMatrix& X, double scale, std::mt19937_64& rng) {
    const auto N = static_cast<Eigen::Index>(X.rows());
    const double dn = static_cast<double>(N);
    std::normal_distribution<double> normal;
    const double sd_diag = scale / std::sqrt(dn);
    const double sd_off = scale / std::sqrt(2.0 * dn);
    for (Eigen::Index i = 0; i < N; ++i) {
        X(i, i) += sd_diag * normal(rng);
        for (Eigen::Index j = i + 1; j < N; ++j) {
            const double re = sd_off * normal(rng);
            const double im = sd_off * normal(rng);
            X(i, j) += std::complex<double>(re, im);
        }
    }
    symmetrize(X);
}

}  // namespace

void symmetrize(HermitianMatrix& X) {
    const auto N = X.rows();
    for (Eigen::Index i = 0; i < N; ++i) {
        X(i, i) = X(i, i).real();
        for (Eigen::Index j = i + 1; j < N; ++j) X(j, i) = std::conj(X(i, j));
    }
}

HermitianMatrix sample_gue(std::size_t N, double variance, std::mt19937_64& rng) {
    check_size(N);
    if (!(variance > 0.0)) throw DomainError("GUE variance must be positive");
    const auto n = static_cast<Eigen::Index>(N);
    HermitianMatrix X = HermitianMatrix::Zero(n, n);
    add_gue(X, std::sqrt(variance), rng);
    return X;
}

HermitianMatrix sample_gue(std::size_t N, double variance, std::uint64_t rng_seed) {
    std::mt19937_64 rng(rng_seed);
    return sample_gue(N, variance, rng);
}

HermitianMatrix ddpm_step(const HermitianMatrix& X, double alpha, std::mt19937_64& rng) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
    if (alpha == 1.0) return X;
    HermitianMatrix Y = std::sqrt(alpha) * X;
    add_gue(Y, std::sqrt(1.0 - alpha), rng);
    return Y;
}

MatrixEnsemble gue_ensemble(std::size_t N, double variance, std::size_t members, std::uint64_t rng_seed) {
    check_size(N);
    MatrixEnsemble ens{N, std::vector<HermitianMatrix>(members), rng_seed};
    parallel_for(members, [&](std::size_t i) { ens.members[i] = sample_gue(N, variance, rng_seed ^ i); });
    return ens;
}

std::vector<double> eigenvalues(const HermitianMatrix& X) {
    Eigen::SelfAdjointEigenSolver<HermitianMatrix> solver(X, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("self-adjoint eigendecomposition failed");
    const auto& ev = solver.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

EsdResult esd(const MatrixEnsemble& ens) {
    if (ens.members.empty()) throw DomainError("empty ensemble");
    std::vector<std::vector<double>> parts(ens.members.size());
    parallel_for(ens.members.size(), [&](std::size_t i) {
        try {
            parts[i] = eigenvalues(ens.members[i]);
        } catch (const NumericalError&) {
            throw NumericalError("eigendecomposition failed for ensemble member " + std::to_string(i));
        }
    });
    EsdResult r;
    for (auto& p : parts) r.eigenvalues.insert(r.eigenvalues.end(), p.begin(), p.end());
    std::sort(r.eigenvalues.begin(), r.eigenvalues.end());
    return r;
}

std::vector<double> initial_diagonal(const InitialSpectrum& spec, std::size_t N) {
    check_size(N);
    if (const auto* d = std::get_if<DiracSpectrum>(&spec)) return std::vector<double>(N, d->a);
    if (std::holds_alternative<TwoAtomSpectrum>(spec)) {
        std::vector<double> v(N, 1.0);
        std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(N / 2), -1.0);
        return v;
    }
    if (const auto* atoms = std::get_if<ParticleMeasure>(&spec)) {
        const auto pos = atoms->positions();
        std::vector<double> v(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(N);
            v[i] = pos[std::min(pos.size() - 1, static_cast<std::size_t>(u * static_cast<double>(pos.size())))];
        }
        return v;
    }
    const auto q = to_particles(std::get<GridMeasure>(spec), N);
    return {q.positions().begin(), q.positions().end()};
}

std::vector<McSnapshot> run_forward_mc(const InitialSpectrum& x0, const Schedule& s, const McOptions& opts) {
    if (opts.n_steps < 1) throw DomainError("n_steps must be at least 1");
    if (opts.members < 1) throw DomainError("at least one ensemble member is required");
    const std::size_t K = opts.n_steps;
    const double T = s.horizon();
    const double dt = T / static_cast<double>(K);

    // step index of each snapshot, deduplicated and ascending
    std::vector<std::size_t> record;
    if (opts.snapshot_times.empty()) {
        record.push_back(K);
    } else {
        for (double t : opts.snapshot_times) {
            if (!(t >= 0.0 && t <= T * (1.0 + 1e-12))) throw DomainError("snapshot time outside [0, T]");
            record.push_back(std::min(K, static_cast<std::size_t>(std::llround(t / dt))));
        }
        std::sort(record.begin(), record.end());
        record.erase(std::unique(record.begin(), record.end()), record.end());
    }

    std::vector<double> alphas(K);
    std::vector<double> lambda(K + 1, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double b = s.beta(dt * static_cast<double>(k));
        alphas[k] = std::exp(-b * dt);
        lambda[k + 1] = lambda[k] + b * dt;
    }

    const auto diag = initial_diagonal(x0, opts.N);
    const auto n = static_cast<Eigen::Index>(opts.N);
    // spectra[member][snapshot]
    std::vector<std::vector<std::vector<double>>> spectra(opts.members);
    parallel_for(opts.members, [&](std::size_t m) {
        std::mt19937_64 rng(opts.rng_seed ^ m);
        HermitianMatrix X = HermitianMatrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) X(i, i) = diag[static_cast<std::size_t>(i)];
        auto& out = spectra[m];
        std::size_t next = 0;
        for (std::size_t k = 0; k <= K && next < record.size(); ++k) {
            if (k > 0) {
                X *= std::sqrt(alphas[k - 1]);
                add_gue(X, std::sqrt(1.0 - alphas[k - 1]), rng);
            }
            if (record[next] == k) {
                try {
                    out.push_back(eigenvalues(X));
                } catch (const NumericalError&) {
                    throw NumericalError("eigendecomposition failed for ensemble member " + std::to_string(m));
                }
                ++next;
            }
        }
    });

    std::vector<McSnapshot> snaps;
    for (std::size_t r = 0; r < record.size(); ++r) {
        McSnapshot snap{dt * static_cast<double>(record[r]), lambda[record[r]], {}};
        for (const auto& member : spectra) {
            snap.esd.eigenvalues.insert(snap.esd.eigenvalues.end(), member[r].begin(), member[r].end());
        }
        std::sort(snap.esd.eigenvalues.begin(), snap.esd.eigenvalues.end());
        snaps.push_back(std::move(snap));
    }
    return snaps;
}

void write_esd_csv(std::ostream& out, const std::vector<McSnapshot>& snapshots) {
    out << "t,eigenvalue\n" << std::setprecision(17);
    for (const auto& s : snapshots) {
        for (double e : s.esd.eigenvalues) out << s.t << ',' << e << '\n';
    }
}

std::vector<McSummaryRow> mc_summary(const std::vector<McSnapshot>& snapshots,
                                     const std::vector<GridMeasure>& predictions) {
    if (snapshots.size() != predictions.size()) throw DomainError("one prediction per snapshot is required");
    std::vector<McSummaryRow> rows;
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        const auto p = snapshots[i].esd.as_measure();
        rows.push_back({snapshots[i].t, mean(p), variance(p), w2(p, predictions[i])});
    }
    return rows;
}

std::string mc_summary_json(const std::vector<McSummaryRow>& rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["t"] = r.t;
        j["mean"] = r.mean;
        j["variance"] = r.variance;
        j["w2_to_prediction"] = r.w2_to_prediction;
        arr.push_back(j);
    }
    return arr.dump(2);
}

}  // namespace freeflow
