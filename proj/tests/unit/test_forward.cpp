#include <doctest.h>

#include "freeflow/errors.hpp"
#include "freeflow/forward.hpp"
#include "freeflow/functionals.hpp"
#include "freeflow/matrix_mc.hpp"
#include "helpers.hpp"

#include <algorithm>
#include <sstream>

using namespace freeflow;
using testing::sc;
using testing::sc_ref;

namespace {

const double kLn2 = std::log(2.0);

ParticleMeasure two_atoms() {
    const ParticleMeasure::Atom a[] = {{-1.0, 0.5}, {1.0, 0.5}};
    return ParticleMeasure::from_atoms(a, 2000);
}

}  // namespace

TEST_CASE("schedule values") {
    const auto c = Schedule::constant(1.0, 1.0);
    CHECK(c(kLn2).beta == doctest::Approx(1.0));
    CHECK(c(kLn2).Lambda == doctest::Approx(kLn2));
    CHECK(c(0.0).Lambda == 0.0);
    const auto lin = Schedule::linear(0.0, 2.0, 2.0);  // beta(t) = t
    CHECK(lin(2.0).beta == doctest::Approx(2.0));
    CHECK(lin(2.0).Lambda == doctest::Approx(2.0));
    CHECK(lin(1.0).Lambda == doctest::Approx(0.5));
    CHECK(lin.time_at_Lambda(0.5) == doctest::Approx(1.0));
    const auto cos = Schedule::cosine(1.0);
    CHECK(cos(0.0).Lambda == 0.0);
    CHECK(cos.time_at_Lambda(cos.Lambda(0.37)) == doctest::Approx(0.37).epsilon(1e-9));
    CHECK_THROWS_AS(c(1.5), DomainError);
    CHECK_THROWS_AS(c(-0.1), DomainError);
    CHECK_THROWS_AS(Schedule::constant(-1.0, 1.0), DomainError);
    CHECK_THROWS_AS(Schedule::constant(1.0, 0.0), DomainError);
}

TEST_CASE("closed-form ou marginal of a point mass") {
    const auto s = Schedule::constant(1.0, 20.0);
    const auto p = ou_marginal_semicircle(1.0, s, kLn2);
    CHECK(p.center == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(0.5).epsilon(1e-12));
    const auto p0 = ou_marginal_semicircle(1.0, s, 0.0);
    CHECK(p0.center == 1.0);
    CHECK(p0.is_dirac());
    const auto p20 = ou_marginal_semicircle(1.0, s, 20.0);
    CHECK(std::abs(p20.center - std::exp(-10.0)) <= 1e-4);
    CHECK(std::abs(p20.variance - 1.0) <= 1e-4);
}

TEST_CASE("free convolution with a semicircle") {
    CHECK(w2(free_convolve_semicircle(sc(0, 1), 1.0), sc_ref(0, 2)) <= 1e-2);
    // point mass collapsed at the origin: two coincident particles
    CHECK(w2(free_convolve_semicircle(ParticleMeasure({0.0, 0.0}), 1.0), sc_ref(0, 1)) <= 2e-2);
    const auto smoothed = free_convolve_semicircle(two_atoms(), 0.01);
    const auto out = free_convolve_semicircle(smoothed, 0.5);
    CHECK(std::abs(mean(out)) <= 1e-3);
    CHECK(std::abs(variance(out) - 1.51) <= 2e-2);
    CHECK(out.mass() == doctest::Approx(1.0).epsilon(1e-9));
    // symmetric output
    for (std::size_t i = 0; i < out.n_cells(); ++i) {
        CHECK(std::abs(out.density()[i] - out.density()[out.n_cells() - 1 - i]) <= 1e-6);
    }
}

TEST_CASE("free convolution of two atoms matches the matrix oracle") {
    // diag(-1, 1) + GUE of variance 0.51 realizes (two atoms) ⊞ SC(0, 0.51)
    const auto out = free_convolve_semicircle(free_convolve_semicircle(two_atoms(), 0.01), 0.5);
    const std::size_t N = 1024;
    const auto diag = initial_diagonal(TwoAtomSpectrum{}, N);
    std::vector<double> ev;
    for (std::uint64_t m = 0; m < 4; ++m) {
        auto X = sample_gue(N, 0.51, 11 ^ m);
        for (std::size_t i = 0; i < N; ++i) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += diag[i];
        const auto e = eigenvalues(X);
        ev.insert(ev.end(), e.begin(), e.end());
    }
    std::sort(ev.begin(), ev.end());
    CHECK(w2(ParticleMeasure(ev), out) <= 3e-2);
}

TEST_CASE("ou pushforward") {
    const auto s = Schedule::constant(1.0, 3.0);
    const ParticleMeasure::Atom dirac[] = {{1.0, 1.0}};
    CHECK(w2(ou_pushforward(ParticleMeasure::from_atoms(dirac, 2), s, kLn2), sc_ref(std::sqrt(0.5), 0.5)) <= 1e-2);
    for (double t : {0.5, 2.0}) CHECK(w2(ou_pushforward(sc(0, 1), s, t), sc_ref(0, 1)) <= 1e-2);
    CHECK(w2(ou_pushforward(sc(0, 1), Schedule::linear(0.5, 3.0, 1.0), 0.8), sc_ref(0, 1)) <= 1e-2);
    CHECK(w2(ou_pushforward(two_atoms(), s, 3.0), sc_ref(0, 1)) <= 3e-2);
}

TEST_CASE("exact marginals follow the moment laws") {
    const auto s = Schedule::cosine(1.0);
    const ForwardSource src{sc(0.8, 3.0), 0.0};
    for (double t : {0.2, 0.6, 1.0}) {
        const double L = s.Lambda(t);
        const auto mu = exact_marginal(src, s, t, FlowMode::ou);
        CHECK(std::abs(mean(mu) - std::exp(-L / 2) * 0.8) <= 1e-2);
        CHECK(std::abs(variance(mu) - (1 + std::exp(-L) * (3.0 - 1))) <= 2e-2);
        const auto heat = exact_marginal(src, s, t, FlowMode::heat);
        CHECK(std::abs(variance(heat) - (3.0 + L)) <= 2e-2);
        CHECK(std::abs(mean(heat) - 0.8) <= 1e-2);
    }
    const ForwardSource dirac{make_semicircle(1.0, 0.0), 0.0};
    CHECK_THROWS_AS(exact_marginal(dirac, s, 0.0, FlowMode::ou), DomainError);
}

TEST_CASE("time grids") {
    const auto s = Schedule::constant(1.0, 2.0);
    const auto u = uniform_times(s, 4);
    REQUIRE(u.size() == 5);
    CHECK(u[2] == doctest::Approx(1.0));
    const auto g = graded_times(s, 10, 0.01);
    REQUIRE(g.size() == 11);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == doctest::Approx(2.0));
    CHECK(g[1] - g[0] < g[10] - g[9]);
}

TEST_CASE("particle transport keeps the equilibrium and tracks the variance ODE") {
    ForwardOptions opts;
    opts.n_particles = 1024;
    const auto s2 = Schedule::constant(1.0, 2.0);
    opts.n_steps = suggested_step_count(to_particles(sc(0, 1), 1024), s2, FlowMode::ou);
    opts.store_every = opts.n_steps / 10;
    const auto eq = integrate_forward(sc(0, 1), s2, opts);
    for (const auto& m : eq.measures) CHECK(w2(m, sc_ref(0, 1)) <= 1e-2);

    opts.n_steps = suggested_step_count(to_particles(sc(0, 4), 1024), s2, FlowMode::ou);
    opts.store_every = opts.n_steps / 10;
    const auto wide = integrate_forward(sc(0, 4), s2, opts);
    for (std::size_t k = 0; k < wide.size(); ++k) {
        CHECK(std::abs(variance(wide.measures[k]) - (1 + 3 * std::exp(-wide.times[k]))) <= 2e-2);
    }

    opts.mode = FlowMode::heat;
    opts.n_steps = suggested_step_count(to_particles(sc(0, 1), 1024), Schedule::constant(1.0, 1.0), FlowMode::heat);
    opts.store_every = opts.n_steps / 10;
    const auto heat = integrate_forward(sc(0, 1), Schedule::constant(1.0, 1.0), opts);
    CHECK(std::abs(variance(heat.measures.back()) - 2.0) <= 2e-2);
    for (std::size_t k = 1; k < heat.size(); ++k) {
        CHECK(free_entropy_chi(heat.measures[k]) >= free_entropy_chi(heat.measures[k - 1]) - 1e-9);
    }
}

TEST_CASE("colliding particles are reported") {
    ForwardOptions opts;
    opts.n_steps = 10;
    opts.n_cells = 64;
    std::vector<double> x(64);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1e-6 * static_cast<double>(i);
    CHECK_THROWS_AS(integrate_forward(ParticleMeasure(x), Schedule::constant(1.0, 5.0), opts), NumericalError);
}

TEST_CASE("particle hilbert transform") {
    const auto h = particle_hilbert(std::vector<double>{-1.0, 0.0, 2.0});
    CHECK(h[0] == doctest::Approx((1.0 / -1.0 + 1.0 / -3.0) / 3.0));
    CHECK(h[1] == doctest::Approx((1.0 / 1.0 + 1.0 / -2.0) / 3.0));
}

TEST_CASE("de bruijn identities") {
    const auto heat_s = Schedule::constant(1.0, 1.0);
    const auto heat = sample_trajectory(ForwardSource{sc(0, 1), 0.0}, heat_s, uniform_times(heat_s, 40),
                                        FlowMode::heat);
    for (const auto& p : de_bruijn_residual(heat)) {
        if (std::abs(p.t - 0.5) < 1e-9) {
            CHECK(std::abs(p.dchi_dt - 1.0 / 3.0) <= 1e-2);
            CHECK(std::abs(p.half_beta_fisher - 1.0 / 3.0) <= 1e-2);
        }
        CHECK(std::abs(p.dchi_dt - p.half_beta_fisher) <= 1e-2);
    }

    const auto ou_s = Schedule::constant(1.0, 2.0);
    const auto eq = sample_trajectory(ForwardSource{sc(0, 1), 0.0}, ou_s, uniform_times(ou_s, 20), FlowMode::ou, 1024);
    for (const auto& p : de_bruijn_residual(eq)) {
        CHECK(std::abs(p.dchi_dt) <= 1e-3);
        CHECK(std::abs(p.ou_corrected) <= 1e-2);
    }
    const auto wide = sample_trajectory(ForwardSource{sc(0, 4), 0.0}, ou_s, uniform_times(ou_s, 40), FlowMode::ou);
    for (const auto& p : de_bruijn_residual(wide)) {
        if (p.t >= 0.1) CHECK(std::abs(p.dchi_dt - p.ou_corrected) <= 1e-2);
    }
}

TEST_CASE("trajectory csv schema") {
    const auto s = Schedule::constant(1.0, 1.0);
    const auto traj = sample_trajectory(ForwardSource{sc(0, 2), 0.0}, s, uniform_times(s, 4), FlowMode::ou);
    std::ostringstream out;
    write_trajectory_csv(out, trajectory_rows(traj));
    const auto text = out.str();
    CHECK(text.substr(0, text.find('\n')) == "t,beta,Lambda,mean,variance,chi,fisher,free_energy");
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}
