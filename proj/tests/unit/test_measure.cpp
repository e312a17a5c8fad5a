#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "freeflow/errors.hpp"
#include "helpers.hpp"

using namespace freeflow;
using testing::sc;

namespace {

// Midpoint quadrature of x^k against the exact semicircle density.
double quadrature_moment(double m, double v, unsigned k, std::size_t n = 200000) {
    const auto p = make_semicircle(m, v);
    const double a = m - p.radius(), b = m + p.radius();
    const double h = (b - a) / static_cast<double>(n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a + (static_cast<double>(i) + 0.5) * h;
        s += std::pow(x, k) * semicircle_density(p, x) * h;
    }
    return s;
}

// W2 from M equally spaced quantile levels, each quantile found by bisection
// on the grid CDF.
double brute_w2(const GridMeasure& mu, const GridMeasure& nu, std::size_t M = 20000) {
    auto quantile = [](const GridMeasure& g, double u) {
        double lo = g.x_min(), hi = g.x_max();
        const auto cdf = g.cdf();
        auto F = [&](double x) {
            const double t = std::clamp((x - g.x_min()) / g.dx(), 0.0, static_cast<double>(g.n_cells()));
            const auto i = std::min(static_cast<std::size_t>(t), g.n_cells() - 1);
            return cdf[i] + (t - static_cast<double>(i)) * (cdf[i + 1] - cdf[i]);
        };
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            (F(mid) < u ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(M);
        const double d = quantile(mu, u) - quantile(nu, u);
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(M));
}

}  // namespace

TEST_CASE("semicircle density values") {
    CHECK(semicircle_density(make_semicircle(0, 1), 0.0) == doctest::Approx(1.0 / testing::kPi).epsilon(1e-12));
    CHECK(semicircle_density(make_semicircle(0, 1), 2.0) == 0.0);
    CHECK(semicircle_density(make_semicircle(0, 1), 2.5) == 0.0);
    CHECK(semicircle_density(make_semicircle(0, 4), 0.0) == doctest::Approx(0.5 / testing::kPi).epsilon(1e-12));
    CHECK(quadrature_moment(0, 4, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("degenerate semicircle has no density") {
    CHECK_THROWS_WITH_AS(semicircle_density(make_semicircle(1, 0), 1.0), "degenerate semicircle has no density",
                         DomainError);
    CHECK_THROWS_AS(semicircle_to_grid(make_semicircle(1, 0), 64), DomainError);
    CHECK_THROWS_AS(make_semicircle(0, -1), DomainError);
}

TEST_CASE("semicircle grid geometry and moments") {
    const auto mu = sc(0, 1);
    CHECK(mu.x_min() == doctest::Approx(-2.5));
    CHECK(mu.x_max() == doctest::Approx(2.5));
    CHECK(mu.mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(moment(mu, 2) - 1.0) <= 2e-3);
    CHECK(std::abs(moment(mu, 4) - 2.0) <= 5e-3);
    CHECK(std::abs(moment(mu, 4) - quadrature_moment(0, 1, 4)) <= 5e-3);
    const auto shifted = sc(3, 1);
    CHECK(std::abs(mean(shifted) - 3.0) <= 1e-3);
    CHECK(std::abs(moment(shifted, 1) - 3.0) <= 1e-3);
    CHECK(shifted.x_min() == doctest::Approx(0.5));
    for (std::size_t i = 0; i < mu.n_cells(); ++i) CHECK(shifted.density()[i] == doctest::Approx(mu.density()[i]));
}

TEST_CASE("grid measure invariants are enforced") {
    CHECK_THROWS_AS(GridMeasure(0, 1, std::vector<double>(8, 2.0)), DomainError);
    CHECK_THROWS_AS(GridMeasure(0, 1, std::vector<double>(4, 1.0)), DomainError);
    CHECK_THROWS_AS(GridMeasure(1, 0, std::vector<double>(8, 1.0)), DomainError);
    std::vector<double> neg(8, 1.0);
    neg[0] = -0.5;
    neg[1] = 1.5;
    CHECK_THROWS_AS(GridMeasure(0, 1, neg), DomainError);
    CHECK_NOTHROW(GridMeasure(0, 1, std::vector<double>(8, 1.0)));
    CHECK(GridMeasure::normalized(0, 2, std::vector<double>(16, 3.0)).density()[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(ParticleMeasure({1.0}), DomainError);
    CHECK_THROWS_AS(ParticleMeasure({1.0, 0.0}), DomainError);
}

TEST_CASE("quantile particles") {
    const auto three = to_particles(sc(0, 1), 3);
    REQUIRE(three.size() == 3);
    CHECK(three[0] < three[1]);
    CHECK(three[1] < three[2]);
    CHECK(std::abs(three[0] + three[2]) <= 1e-2);
    CHECK(std::abs(three[1]) <= 1e-2);

    const auto uni = to_particles(GridMeasure(0, 1, std::vector<double>(64, 1.0)), 4);
    const double expected[] = {0.125, 0.375, 0.625, 0.875};
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(uni[i] - expected[i]) <= 1e-3);

    const auto mu = sc(0, 1);
    const auto p = to_particles(mu, 1024);
    CHECK(w2(to_grid(p, 512), mu) <= 5e-3);
}

TEST_CASE("w2 examples against the brute-force quantile oracle") {
    CHECK(w2(sc(0, 1), sc(0, 1)) <= 1e-6);
    CHECK(std::abs(w2(sc(1, 1), sc(0, 1)) - 1.0) <= 2e-3);
    CHECK(std::abs(w2(sc(0, 4), sc(0, 1)) - 1.0) <= 5e-3);
    CHECK(std::abs(w2(sc(0, 4), sc(0, 1)) - brute_w2(sc(0, 4), sc(0, 1))) <= 1e-4);
    CHECK(std::abs(w2(sc(0.3, 2), sc(-1, 0.5)) - brute_w2(sc(0.3, 2), sc(-1, 0.5))) <= 1e-4);
    CHECK(std::abs(w2(sc(0.3, 2), sc(-1, 0.5)) - std::hypot(1.3, std::sqrt(2.0) - std::sqrt(0.5))) <= 1e-2);
}

TEST_CASE("w2 between particle measures is the quantile sum") {
    const ParticleMeasure a({-1.0, 0.0, 2.0});
    const ParticleMeasure b({0.0, 1.0, 1.0});
    CHECK(w2(a, b) == doctest::Approx(std::sqrt((1.0 + 1.0 + 1.0) / 3.0)));
    CHECK(w2(translate(a, 5.0), translate(b, 5.0)) == doctest::Approx(w2(a, b)).epsilon(1e-12));
    const auto mu = sc(0, 1);
    CHECK(w2(to_particles(mu, 2000), mu) <= 2e-3);
    CHECK(w2(mu, to_particles(mu, 2000)) == doctest::Approx(w2(to_particles(mu, 2000), mu)));
}

TEST_CASE("atoms expand to repeated positions") {
    const ParticleMeasure::Atom atoms[] = {{-1.0, 0.25}, {2.0, 0.75}};
    const auto p = ParticleMeasure::from_atoms(atoms, 8);
    CHECK(p.size() == 8);
    CHECK(std::count(p.positions().begin(), p.positions().end(), -1.0) == 2);
    const auto merged = p.atoms();
    REQUIRE(merged.size() == 2);
    CHECK(merged[1].weight == doctest::Approx(0.75));
    CHECK(mean(p) == doctest::Approx(1.25));
}

TEST_CASE("dilate and translate act on coordinates exactly") {
    const auto mu = sc(0.5, 1);
    const auto d = dilate(mu, 2.0);
    CHECK(d.x_min() == doctest::Approx(2.0 * mu.x_min()));
    CHECK(mean(d) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(variance(d) == doctest::Approx(4.0 * variance(mu)).epsilon(1e-9));
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mean(translate(mu, -0.5)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS(dilate(mu, 0.0), DomainError);
}

TEST_CASE("csv round trip preserves the measure") {
    const auto mu = sc(0.25, 2, 64);
    std::stringstream ss;
    write_csv(ss, mu);
    CHECK(ss.str().rfind("x,density\n", 0) == 0);
    const auto back = read_grid_csv(ss);
    CHECK(back.n_cells() == 64);
    CHECK(w2(mu, back) <= 1e-12);

    const ParticleMeasure p({-0.5, 0.125, 3.0});
    std::stringstream ps;
    write_csv(ps, p);
    CHECK(ps.str().rfind("position\n", 0) == 0);
    CHECK(w2(p, read_particle_csv(ps)) == 0.0);
}
