#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "freeflow/measure.hpp"
#include "freeflow/schedule.hpp"

namespace freeflow {

using HermitianMatrix = Eigen::MatrixXcd;

// Copies the conjugated upper triangle onto the lower one and zeroes the
// imaginary part of the diagonal.
void symmetrize(HermitianMatrix& X);

// Diagonal entries N(0, variance/N); off-diagonal real and imaginary parts
// each N(0, variance/(2N)). The spectrum tends to SC(0, variance).
HermitianMatrix sample_gue(std::size_t N, double variance, std::mt19937_64& rng);
HermitianMatrix sample_gue(std::size_t N, double variance, std::uint64_t rng_seed);

// sqrt(alpha) X + sqrt(1 - alpha) Z with Z a fresh unit-variance GUE sample.
HermitianMatrix ddpm_step(const HermitianMatrix& X, double alpha, std::mt19937_64& rng);

struct MatrixEnsemble {
    std::size_t N = 0;
    std::vector<HermitianMatrix> members;
    std::uint64_t rng_seed = 0;
};

// Independent GUE members; member i draws from the stream seeded seed ^ i.
MatrixEnsemble gue_ensemble(std::size_t N, double variance, std::size_t members, std::uint64_t rng_seed);

struct EsdResult {
    std::vector<double> eigenvalues;  // pooled over members, sorted

    ParticleMeasure as_measure() const { return ParticleMeasure(eigenvalues); }
};

// Throws NumericalError naming the member whose decomposition failed.
EsdResult esd(const MatrixEnsemble& ens);
std::vector<double> eigenvalues(const HermitianMatrix& X);

// Initial data matrices are diagonal: a I, diag(+1, -1) in equal halves, or
// the N quantiles (levels (i - 1/2)/N) of a density or of an atomic law.
struct DiracSpectrum {
    double a = 0.0;
};
struct TwoAtomSpectrum {};
using InitialSpectrum = std::variant<DiracSpectrum, TwoAtomSpectrum, GridMeasure, ParticleMeasure>;

std::vector<double> initial_diagonal(const InitialSpectrum& spec, std::size_t N);

struct McOptions {
    std::size_t n_steps = 100;
    std::size_t N = 512;
    std::size_t members = 32;
    std::uint64_t rng_seed = 1;
    // Times at which the ESD is recorded, rounded to the step grid. Empty
    // records the final time only.
    std::vector<double> snapshot_times;
};

struct McSnapshot {
    double t;       // grid time actually recorded
    double Lambda;  // -log of the accumulated product of alphas
    EsdResult esd;
};

// DDPM chain with per-step alpha = exp(-beta(t_k) dt) at the left endpoint.
// Members evolve independently in parallel; results are merged by member
// index, so output is deterministic for a given seed.
std::vector<McSnapshot> run_forward_mc(const InitialSpectrum& x0, const Schedule& s, const McOptions& opts);

// Long-format CSV `t,eigenvalue`.
void write_esd_csv(std::ostream& out, const std::vector<McSnapshot>& snapshots);

struct McSummaryRow {
    double t, mean, variance, w2_to_prediction;
};

// W2 of each pooled ESD against the predicted law at the same time.
std::vector<McSummaryRow> mc_summary(const std::vector<McSnapshot>& snapshots,
                                     const std::vector<GridMeasure>& predictions);
// JSON array of {t, mean, variance, w2_to_prediction}.
std::string mc_summary_json(const std::vector<McSummaryRow>& rows);

}  // namespace freeflow
