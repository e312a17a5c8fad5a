#include "freeflow/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "freeflow/errors.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

namespace {

double interpolated_density(const GridMeasure& mu, double x) {
    const auto rho = mu.density();
    const std::size_t n = rho.size();
    const double s = (x - mu.x_min()) / mu.dx() - 0.5;
    if (s <= 0.0) return rho.front();
    if (s >= static_cast<double>(n - 1)) return rho.back();
    const auto j = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(j);
    return (1.0 - f) * rho[j] + f * rho[j + 1];
}

bool has_wide_gap(const GridMeasure& mu) {
    const auto rho = mu.density();
    const std::size_t lo = mu.support_begin();
    const std::size_t hi = mu.support_end();
    std::size_t run = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        run = rho[i] > 0.0 ? 0 : run + 1;
        if (run > 10) return true;
    }
    return false;
}

// Second antiderivative of log|u|.
double log_antiderivative2(double u) {
    if (u == 0.0) return 0.0;
    return 0.5 * u * u * std::log(std::abs(u)) - 0.75 * u * u;
}

// Mean of log|X - Y| for X, Y uniform on two cells whose left edges are k
// cells apart.
double cell_pair_log_kernel(std::size_t k, double h) {
    if (k == 0) return std::log(h) - 1.5;
    const double kk = static_cast<double>(k);
    if (k > 48) {
        const double inv2 = 1.0 / (kk * kk);
        return std::log(kk * h) - inv2 / 12.0 - inv2 * inv2 / 60.0;
    }
    const double d = kk * h;
    return (log_antiderivative2(d + h) - 2.0 * log_antiderivative2(d) + log_antiderivative2(d - h)) / (h * h);
}

}  // namespace

double ConjugateField::at(double x) const {
    const std::size_t n = values.size();
    const double s = (x - x_min) / dx() - 0.5;
    if (s <= 0.0) return values.front();
    if (s >= static_cast<double>(n - 1)) return values.back();
    const auto j = static_cast<std::size_t>(s);
    const double f = s - static_cast<double>(j);
    return (1.0 - f) * values[j] + f * values[j + 1];
}

double hilbert_transform(const GridMeasure& mu, double x) {
    const auto rho = mu.density();
    const std::size_t n = rho.size();
    const double h = mu.dx();
    double sum = 0.0;
    if (x < mu.x_min() || x > mu.x_max()) {
        for (std::size_t j = 0; j < n; ++j) sum += rho[j] / (x - mu.center(j));
        return sum * h;
    }
    const double ref = interpolated_density(mu, x);
    const double coincide = 1e-12 * h;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = x - mu.center(j);
        if (std::abs(d) <= coincide) {
            // limit of (rho_j - rho(x)) / (x - x_j) is -rho'(x_j)
            const double left = j > 0 ? rho[j - 1] : 0.0;
            const double right = j + 1 < n ? rho[j + 1] : 0.0;
            sum -= (right - left) / (2.0 * h);
        } else {
            sum += (rho[j] - ref) / d;
        }
    }
    sum *= h;
    if (ref > 0.0) sum += ref * std::log((x - mu.x_min()) / (mu.x_max() - x));
    return sum;
}

ConjugateField conjugate_variable(const GridMeasure& mu) {
    ConjugateField xi;
    xi.x_min = mu.x_min();
    xi.x_max = mu.x_max();
    xi.values.assign(mu.n_cells(), 0.0);
    xi.gap_warning = has_wide_gap(mu);
    parallel_for(mu.n_cells(), [&](std::size_t i) { xi.values[i] = 2.0 * hilbert_transform(mu, mu.center(i)); });
    return xi;
}

double conjugate_pairing(const GridMeasure& mu, const ConjugateField& xi) {
    if (xi.n_cells() != mu.n_cells()) throw DomainError("conjugate field does not match the measure grid");
    double s = 0.0;
    const auto rho = mu.density();
    for (std::size_t i = 0; i < rho.size(); ++i) s += mu.center(i) * xi.values[i] * rho[i];
    return s * mu.dx();
}

double log_energy(const GridMeasure& mu) {
    const auto rho = mu.density();
    const std::size_t lo = mu.support_begin();
    const std::size_t hi = mu.support_end();
    const double h = mu.dx();
    const std::size_t span = hi - lo;
    std::vector<double> kernel(span);
    for (std::size_t k = 0; k < span; ++k) kernel[k] = cell_pair_log_kernel(k, h);

    double total = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        if (rho[i] == 0.0) continue;
        double row = 0.5 * rho[i] * kernel[0];
        for (std::size_t j = i + 1; j < hi; ++j) row += rho[j] * kernel[j - i];
        total += rho[i] * row;
    }
    return 2.0 * total * h * h;
}

double free_entropy_chi_from_log_energy(double log_energy_value) {
    return log_energy_value + 0.75 + 0.5 * std::log(2.0 * std::numbers::pi);
}

double free_entropy_chi(const GridMeasure& mu) { return free_entropy_chi_from_log_energy(log_energy(mu)); }

double free_fisher(const GridMeasure& mu, const ConjugateField& xi) {
    if (xi.n_cells() != mu.n_cells()) throw DomainError("conjugate field does not match the measure grid");
    double s = 0.0;
    const auto rho = mu.density();
    for (std::size_t i = 0; i < rho.size(); ++i) s += xi.values[i] * xi.values[i] * rho[i];
    return s * mu.dx();
}

double free_fisher(const GridMeasure& mu) { return free_fisher(mu, conjugate_variable(mu)); }

double relative_fisher(const GridMeasure& mu, const ConjugateField& xi) {
    if (xi.n_cells() != mu.n_cells()) throw DomainError("conjugate field does not match the measure grid");
    double s = 0.0;
    const auto rho = mu.density();
    for (std::size_t i = 0; i < rho.size(); ++i) {
        const double g = xi.values[i] - mu.center(i);
        s += g * g * rho[i];
    }
    return s * mu.dx();
}

double free_energy(const GridMeasure& mu) { return 0.5 * moment(mu, 2) - log_energy(mu); }

std::vector<double> free_energy_gradient(const GridMeasure& mu, const ConjugateField& xi) {
    std::vector<double> g(mu.n_cells());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = mu.center(i) - xi.values[i];
    return g;
}

std::vector<double> additive_entropy_gradient(const GridMeasure& mu, const ConjugateField& xi) {
    std::vector<double> g(mu.n_cells());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.5 * mu.center(i) + xi.values[i];
    return g;
}

FunctionalReport evaluate_functionals(const GridMeasure& mu) {
    FunctionalReport r;
    const auto xi = conjugate_variable(mu);
    r.log_energy = log_energy(mu);
    r.chi = free_entropy_chi_from_log_energy(r.log_energy);
    r.fisher = free_fisher(mu, xi);
    r.second_moment = moment(mu, 2);
    r.free_energy = 0.5 * r.second_moment - r.log_energy;
    r.gap_warning = xi.gap_warning;
    return r;
}

std::string FunctionalReport::to_json() const {
    nlohmann::ordered_json j;
    j["log_energy"] = log_energy;
    j["chi"] = chi;
    j["fisher"] = fisher;
    j["free_energy"] = free_energy;
    j["second_moment"] = second_moment;
    return j.dump();
}

}  // namespace freeflow
