#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "freeflow/errors.hpp"
#include "freeflow/forward.hpp"
#include "freeflow/reverse.hpp"
#include "helpers.hpp"

using namespace freeflow;
using testing::sc;
using testing::sc_ref;

namespace {

FlowTrajectory semicircle_traj(double m, double v, double T, std::size_t n = 60, FlowMode mode = FlowMode::ou) {
    const auto s = Schedule::constant(1.0, T);
    return sample_trajectory(ForwardSource{make_semicircle(m, v), 0.0}, s, graded_times(s, n, v), mode);
}

ForwardSource smoothed_two_atoms() {
    const ParticleMeasure::Atom a[] = {{-1.0, 0.5}, {1.0, 0.5}};
    return {ParticleMeasure::from_atoms(a, 3000), 0.01};
}

}  // namespace

TEST_CASE("reverse velocity on the stationary flow vanishes") {
    const auto traj = semicircle_traj(0, 1, 1.0, 20);
    for (double s : {0.0, 0.3, 0.9}) {
        for (double x : {-1.5, -0.4, 0.0, 1.2, 1.8}) CHECK(std::abs(reverse_velocity(traj, s, x)) <= 1e-2);
    }
}

TEST_CASE("reverse velocity is odd for centered laws") {
    const auto traj = semicircle_traj(0, 4, 2.0, 20);
    for (double s : {0.1, 1.0, 1.9}) CHECK(std::abs(reverse_velocity(traj, s, 0.0)) <= 1e-3);
    CHECK(reverse_velocity(traj, 0.5, 1.0) == doctest::Approx(-reverse_velocity(traj, 0.5, -1.0)).epsilon(1e-6));
}

TEST_CASE("reverse velocity at the center of a point-mass flow") {
    const double T = 1.0, ln2 = std::log(2.0);
    const auto s = Schedule::constant(1.0, T);
    auto times = uniform_times(s, 20);
    times.erase(times.begin());
    times.push_back(ln2);
    std::sort(times.begin(), times.end());
    const auto traj = sample_trajectory(ForwardSource{make_semicircle(1.0, 0.0), 0.0}, s, times, FlowMode::ou);
    const double m = std::sqrt(0.5);
    CHECK(std::abs(reverse_velocity(traj, T - ln2, m) - 0.5 * m) <= 1e-2);
}

TEST_CASE("reverse time outside the stored range") {
    const auto traj = semicircle_traj(0, 1, 1.0, 10);
    CHECK_THROWS_AS(reverse_velocity(traj, -0.5, 0.0), DomainError);
    CHECK_THROWS_AS(reverse_velocity(traj, 1.5, 0.0), DomainError);
}

TEST_CASE("semicircle reconstructions") {
    ReverseOptions opts;
    opts.n_particles = 2048;
    const auto wide = integrate_reverse(semicircle_traj(0, 4, 2.0), opts);
    CHECK(wide.w2_to_target <= 2e-2);
    const auto eq = integrate_reverse(semicircle_traj(0, 1, 2.0), opts);
    CHECK(eq.w2_to_target <= 1e-2);
    for (const auto& e : eq.path) CHECK(e.w2_to_forward <= 1e-2);
}

TEST_CASE("semicircle moments follow the reversed ODEs") {
    const double T = 2.0;
    const auto traj = semicircle_traj(1.0, 3.0, T);
    const auto r = integrate_reverse(traj);
    for (const auto& e : r.path) {
        const double L = T - e.s;  // beta = 1
        CHECK(std::abs(mean(e.measure) - std::exp(-L / 2)) <= 2e-2);
        CHECK(std::abs(variance(e.measure) - (1 + 2 * std::exp(-L))) <= 2e-2);
    }
}

TEST_CASE("smoothed two-atom reconstruction") {
    const auto s = Schedule::constant(1.0, 2.0);
    const auto traj = sample_trajectory(smoothed_two_atoms(), s, graded_times(s, 100, 0.01), FlowMode::ou);
    ReverseOptions opts;
    opts.n_particles = 4096;
    const auto r = integrate_reverse(traj, opts);
    CHECK(r.w2_to_target <= 5e-2);
    REQUIRE(r.path.size() == traj.size());
    for (const auto& e : r.path) CHECK(e.w2_to_forward <= 3e-2);
    CHECK(r.energy.slack >= -1e-2);
}

TEST_CASE("reverse outputs") {
    const auto r = integrate_reverse(semicircle_traj(0, 2, 1.0, 10));
    std::ostringstream csv;
    r.write_steps_csv(csv);
    CHECK(csv.str().rfind("s,mean,variance,w2_to_forward_marginal\n", 0) == 0);
    const auto j = r.to_json();
    for (const char* key : {"w2_to_target", "control_energy", "delta_chi", "slack"}) {
        CHECK(j.find(key) != std::string::npos);
    }
}

TEST_CASE("closed-form drift of a point mass") {
    const auto s = Schedule::constant(1.0, 1.0);
    const double t = std::log(2.0);
    CHECK(appendix_b_reverse_drift(1.0, s, t, 0.0) == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-12));
    CHECK(appendix_b_reverse_drift(1.0, s, t, 1.0) == doctest::Approx(0.5 - std::sqrt(0.5)).epsilon(1e-12));
    CHECK(appendix_b_reverse_drift(0.0, s, 0.4, 0.0) == 0.0);
    CHECK_THROWS_AS(appendix_b_reverse_drift(1.0, s, 0.0, 0.0), DomainError);
}

TEST_CASE("drift variants are reported side by side") {
    const auto s = Schedule::constant(1.0, 1.0);
    auto times = uniform_times(s, 20);
    times.erase(times.begin());
    const auto traj = sample_trajectory(ForwardSource{make_semicircle(1.0, 0.0), 0.0}, s, times, FlowMode::ou);
    const auto d = drift_variants(traj, 1.0, 0.2, 0.5);
    CHECK(d.probability_flow == doctest::Approx(reverse_velocity(traj, 0.2, 0.5)));
    CHECK(d.closed_form == doctest::Approx(appendix_b_reverse_drift(1.0, s, 0.8, 0.5)));
    CHECK(std::isfinite(d.stated_sde_drift));
}

TEST_CASE("control energy closed forms") {
    const auto heat = semicircle_traj(0, 1, 1.0, 60, FlowMode::heat);
    const auto e = control_energy(heat);
    CHECK(std::abs(e.J - 0.5 * std::log(2.0)) <= 1e-2);
    CHECK(std::abs(e.delta_chi - 0.5 * std::log(2.0)) <= 1e-2);
    CHECK(std::abs(e.slack) <= 1e-2);

    const auto eq = control_energy(semicircle_traj(0, 1, 1.0, 60));
    CHECK(std::abs(eq.delta_chi) <= 1e-3);
    CHECK(std::abs(eq.J - 0.5) <= 1e-2);
    CHECK(eq.slack >= 0.0);

    CHECK(control_energy(semicircle_traj(0, 4, 2.0)).slack >= -1e-2);
}
