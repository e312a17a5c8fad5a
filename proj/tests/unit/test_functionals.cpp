#include <doctest.h>

#include "freeflow/functionals.hpp"
#include "helpers.hpp"

using namespace freeflow;
using testing::sc;

namespace {

// Exact p.v. Hilbert transform of a piecewise-constant density.
double piecewise_constant_hilbert(const GridMeasure& mu, double x) {
    double h = 0.0;
    for (std::size_t i = 0; i < mu.n_cells(); ++i) {
        const double a = mu.edge(i), b = mu.edge(i + 1);
        h += mu.density()[i] * std::log(std::abs((x - a) / (x - b)));
    }
    return h;
}

// Brute-force double integral of log|x - y| on two staggered midpoint grids.
double brute_log_energy(const GridMeasure& mu, std::size_t m = 3000) {
    const double a = mu.x_min(), b = mu.x_max();
    const double h = (b - a) / static_cast<double>(m);
    std::vector<double> xs(m), w(m);
    for (std::size_t i = 0; i < m; ++i) {
        xs[i] = a + (static_cast<double>(i) + 0.5) * h;
        const auto c = std::min(mu.n_cells() - 1, static_cast<std::size_t>((xs[i] - a) / mu.dx()));
        w[i] = mu.density()[c] * h;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = i == j ? h * std::exp(-1.5) : xs[i] - xs[j];  // self-cell average of log|u|
            s += w[i] * w[j] * std::log(std::abs(d));
        }
    }
    return s;
}

}  // namespace

TEST_CASE("hilbert transform of semicircles") {
    CHECK(std::abs(hilbert_transform(sc(0, 1), 1.0) - 0.5) <= 1e-2);
    CHECK(std::abs(hilbert_transform(sc(0, 2), 1.0) - 0.25) <= 1e-2);
    CHECK(std::abs(hilbert_transform(sc(0, 1), 0.0)) <= 1e-3);
    CHECK(std::abs(hilbert_transform(sc(0, 4), 0.0)) <= 1e-3);
    // outside the grid the integrand is regular: 1/x asymptotics
    CHECK(hilbert_transform(sc(0, 1), 50.0) == doctest::Approx(1.0 / 50.0).epsilon(1e-3));
}

TEST_CASE("hilbert transform matches the exact piecewise-constant oracle") {
    const auto uni = GridMeasure(0.0, 1.0, std::vector<double>(255, 1.0));
    for (double x : {0.3, 0.5, 0.77}) {
        CHECK(hilbert_transform(uni, x) == doctest::Approx(std::log(x / (1.0 - x))).epsilon(1e-6));
        CHECK(hilbert_transform(uni, x) == doctest::Approx(piecewise_constant_hilbert(uni, x)).epsilon(1e-6));
    }
    // smooth density: a fine piecewise-constant oracle converges to the true transform
    auto gauss = [](double x) { return std::exp(-4 * (x - 0.5) * (x - 0.5)); };
    const auto bump = testing::grid_from(-1, 2, 512, gauss);
    const auto fine = testing::grid_from(-1, 2, 65536, gauss);
    for (double x : {-0.4, 0.1, 0.9, 1.6}) {
        CHECK(std::abs(hilbert_transform(bump, x) - piecewise_constant_hilbert(fine, x)) <= 1e-4);
    }
}

TEST_CASE("conjugate variable is linear on semicircles") {
    CHECK(std::abs(conjugate_variable(sc(0, 1)).at(0.7) - 0.7) <= 1e-2);
    CHECK(std::abs(conjugate_variable(sc(0, 4)).at(1.0) - 0.25) <= 1e-2);
    CHECK(std::abs(conjugate_variable(sc(5, 1)).at(5.0)) <= 1e-2);
    CHECK_FALSE(conjugate_variable(sc(0, 1)).gap_warning);
}

TEST_CASE("wide gaps raise the warning flag") {
    const auto gapped = testing::grid_from(-3, 3, 300, [](double x) { return std::abs(x) > 1.5 ? 1.0 : 0.0; });
    CHECK(conjugate_variable(gapped).gap_warning);
    CHECK(evaluate_functionals(gapped).gap_warning);
}

TEST_CASE("log energy against closed forms and brute-force quadrature") {
    CHECK(std::abs(log_energy(sc(0, 1)) + 0.25) <= 5e-3);
    CHECK(std::abs(log_energy(sc(5, 1)) + 0.25) <= 5e-3);
    CHECK(std::abs(log_energy(sc(0, 4)) - (std::log(2.0) - 0.25)) <= 5e-3);
    CHECK(log_energy(GridMeasure(0, 1, std::vector<double>(64, 1.0))) == doctest::Approx(-1.5).epsilon(1e-9));
    const auto mu = sc(0, 1, 128);
    CHECK(std::abs(log_energy(mu) - brute_log_energy(mu)) <= 5e-3);
}

TEST_CASE("free entropy") {
    const double chi1 = 0.5 + 0.5 * std::log(2 * testing::kPi);
    CHECK(std::abs(free_entropy_chi(sc(0, 1)) - chi1) <= 5e-3);
    CHECK(std::abs(free_entropy_chi(sc(2, 1)) - free_entropy_chi(sc(0, 1))) <= 1e-6);
    for (double v : {0.25, 2.0, 9.0}) {
        CHECK(std::abs(free_entropy_chi(sc(0, v)) - free_entropy_chi(sc(0, 1)) - 0.5 * std::log(v)) <= 5e-3);
    }
    CHECK(free_entropy_chi_from_log_energy(-0.25) == doctest::Approx(chi1));
}

TEST_CASE("free fisher information") {
    CHECK(std::abs(free_fisher(sc(0, 1)) - 1.0) <= 2e-2);
    CHECK(std::abs(free_fisher(sc(0, 4)) - 0.25) <= 1e-2);
    CHECK(std::abs(free_fisher(sc(3, 1)) - 1.0) <= 2e-2);
    const auto xi = conjugate_variable(sc(0, 2));
    CHECK(free_fisher(sc(0, 2), xi) == doctest::Approx(free_fisher(sc(0, 2))));
}

TEST_CASE("free energy") {
    CHECK(std::abs(free_energy(sc(0, 1)) - 0.75) <= 1e-2);
    CHECK(std::abs(free_energy(sc(0, 4)) - (2.25 - std::log(2.0))) <= 1e-2);
    CHECK(free_energy(sc(0, 0.5)) > free_energy(sc(0, 1)));
}

TEST_CASE("pairing identity") {
    for (auto mu : {sc(0, 1), sc(2, 0.5), sc(-1, 3)}) {
        CHECK(std::abs(conjugate_pairing(mu, conjugate_variable(mu)) - 1.0) <= 1e-2);
    }
}

TEST_CASE("functional report is internally consistent") {
    const auto r = evaluate_functionals(sc(0.5, 2));
    CHECK(r.chi == doctest::Approx(free_entropy_chi_from_log_energy(r.log_energy)));
    CHECK(r.free_energy == doctest::Approx(0.5 * r.second_moment - r.log_energy));
    const auto j = r.to_json();
    for (const char* key : {"log_energy", "chi", "fisher", "free_energy"}) CHECK(j.find(key) != std::string::npos);
}

TEST_CASE("gradient fields on the equilibrium") {
    const auto mu = sc(0, 1);
    const auto xi = conjugate_variable(mu);
    const auto g = free_energy_gradient(mu, xi);
    const auto add = additive_entropy_gradient(mu, xi);
    REQUIRE(g.size() == mu.n_cells());
    for (std::size_t i = mu.n_cells() / 4; i < 3 * mu.n_cells() / 4; ++i) {
        CHECK(std::abs(g[i]) <= 1e-2);
        CHECK(add[i] == doctest::Approx(0.5 * mu.center(i) + xi.values[i]));
    }
}
