#include "freeflow/reverse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "freeflow/errors.hpp"
#include "freeflow/parallel.hpp"

namespace freeflow {

namespace {

// Hilbert transform of each stored marginal, extended linearly beyond the
// support from the outermost cells. The continuity equation only sees v on
// supp mu_t; the physical exterior transform decays like 1/x and makes the
// reversed field expel any particle that drifts past an edge.
class ReverseField {
public:
    explicit ReverseField(const FlowTrajectory& traj) : traj_(traj) {
        anchors_.reserve(traj.size());
        for (std::size_t k = 0; k < traj.size(); ++k) anchors_.push_back(make_anchor(k));
    }

    double hilbert(double t, double x) const {
        if (traj_.size() == 1) return stored(0, x);
        const auto [k, w] = bracket(t);
        const double h0 = w < 1.0 ? stored(k, x) : 0.0;
        const double h1 = w > 0.0 ? stored(k + 1, x) : 0.0;
        return (1.0 - w) * h0 + w * h1;
    }

    double velocity(double t, double beta, double x) const {
        const double h = hilbert(t, x);
        return traj_.mode == FlowMode::ou ? 0.5 * beta * x - beta * h : -beta * h;
    }

private:
    struct Anchor {
        double lo, h_lo, slope_lo;
        double hi, h_hi, slope_hi;
    };

    Anchor make_anchor(std::size_t k) const {
        const auto& mu = traj_.measures[k];
        const auto& xi = traj_.xi_fields[k];
        // Subordination output leaves roundoff-level mass outside the true
        // support; anchor on cells carrying non-negligible density.
        const auto rho = mu.density();
        const double floor = 1e-6 * *std::max_element(rho.begin(), rho.end());
        std::size_t first = mu.support_begin();
        std::size_t last = mu.support_end() - 1;
        while (first < last && rho[first] <= floor) ++first;
        while (last > first && rho[last] <= floor) --last;
        const std::size_t m = std::max<std::size_t>(4, (last - first) / 50);
        const std::size_t inner_lo = std::min(first + m, last);
        const std::size_t inner_hi = last > first + m ? last - m : first;
        const double dx = mu.dx();
        Anchor a{};
        a.lo = mu.center(first);
        a.h_lo = 0.5 * xi.values[first];
        a.slope_lo = inner_lo > first ? 0.5 * (xi.values[inner_lo] - xi.values[first]) / (dx * static_cast<double>(inner_lo - first)) : 0.0;
        a.hi = mu.center(last);
        a.h_hi = 0.5 * xi.values[last];
        a.slope_hi = last > inner_hi ? 0.5 * (xi.values[last] - xi.values[inner_hi]) / (dx * static_cast<double>(last - inner_hi)) : 0.0;
        return a;
    }

    double stored(std::size_t k, double x) const {
        const auto& a = anchors_[k];
        if (x < a.lo) return a.h_lo + a.slope_lo * (x - a.lo);
        if (x > a.hi) return a.h_hi + a.slope_hi * (x - a.hi);
        return 0.5 * traj_.xi_fields[k].at(x);
    }

    // Index k with times[k] <= t <= times[k + 1] and the interpolation weight.
    std::pair<std::size_t, double> bracket(double t) const {
        const auto& ts = traj_.times;
        if (t <= ts.front()) return {0, 0.0};
        if (t >= ts.back()) return {ts.size() - 2, 1.0};
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        const auto k = static_cast<std::size_t>(it - ts.begin()) - 1;
        return {k, (t - ts[k]) / (ts[k + 1] - ts[k])};
    }

    const FlowTrajectory& traj_;
    std::vector<Anchor> anchors_;
};

double forward_time(const FlowTrajectory& traj, double s) {
    const double T = traj.times.back();
    const double slack = 1e-12 * std::max(1.0, T);
    if (!(s >= -slack && s <= T - traj.times.front() + slack)) {
        std::ostringstream msg;
        msg << "reverse time " << s << " outside the stored range [0, " << T - traj.times.front() << "]";
        throw DomainError(msg.str());
    }
    return std::clamp(T - s, traj.times.front(), T);
}

void check_ordering(std::span<const double> x, double s) {
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] - x[i - 1] >= 1e-12)) {
            std::ostringstream msg;
            msg << "particle collision near reverse time s = " << s << "; use more substeps or fewer particles";
            throw NumericalError(msg.str());
        }
    }
}

}  // namespace

double reverse_velocity(const FlowTrajectory& traj, double s, double x) {
    traj.validate();
    const double t = forward_time(traj, s);
    return ReverseField(traj).velocity(t, traj.schedule.beta(t), x);
}

ControlEnergy control_energy(const FlowTrajectory& traj) {
    traj.validate();
    const std::size_t n = traj.size();
    std::vector<double> integrand(n);
    parallel_for(n, [&](std::size_t k) {
        integrand[k] = traj.schedule.beta(traj.times[k]) * free_fisher(traj.measures[k], traj.xi_fields[k]);
    });
    double J = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        J += 0.25 * (integrand[k] + integrand[k - 1]) * (traj.times[k] - traj.times[k - 1]);
    }
    const double dchi = free_entropy_chi(traj.measures.back()) - free_entropy_chi(traj.measures.front());
    return {J, dchi, J - dchi};
}

ReverseResult integrate_reverse(const FlowTrajectory& traj, const ReverseOptions& opts) {
    traj.validate();
    if (traj.size() < 2) throw DomainError("reverse integration needs at least two stored times");
    if (opts.substeps < 1) throw DomainError("substeps must be positive");
    const std::size_t n = traj.size();
    const double T = traj.times.back();
    const std::size_t cells = opts.n_cells ? opts.n_cells : traj.measures.back().n_cells();

    const auto start = to_particles(traj.measures.back(), opts.n_particles);
    std::vector<double> x(start.positions().begin(), start.positions().end());
    std::vector<double> mid(x.size());

    const ReverseField field(traj);
    std::vector<ReversePathEntry> path;
    auto record = [&](std::size_t k) {
        auto g = to_grid(ParticleMeasure(x), cells);
        const double d = w2(g, traj.measures[k]);
        path.push_back({T - traj.times[k], std::move(g), d});
    };

    record(n - 1);
    for (std::size_t k = n - 1; k > 0; --k) {
        const double t_hi = traj.times[k];
        const double dt = (t_hi - traj.times[k - 1]) / static_cast<double>(opts.substeps);
        for (std::size_t sub = 0; sub < opts.substeps; ++sub) {
            // forward time decreases as the reverse clock advances
            const double t0 = t_hi - dt * static_cast<double>(sub);
            const double tm = t0 - 0.5 * dt;
            const double b0 = traj.schedule.beta(t0);
            const double bm = traj.schedule.beta(tm);
            parallel_for(x.size(), [&](std::size_t i) { mid[i] = x[i] + 0.5 * dt * field.velocity(t0, b0, x[i]); });
            check_ordering(mid, T - tm);
            parallel_for(x.size(), [&](std::size_t i) { x[i] += dt * field.velocity(tm, bm, mid[i]); });
            check_ordering(x, T - (t0 - dt));
        }
        record(k - 1);
    }

    ReverseResult result{path.back().measure, path.back().w2_to_forward, std::move(path), control_energy(traj)};
    return result;
}

std::string ReverseResult::to_json() const {
    nlohmann::ordered_json j;
    j["w2_to_target"] = w2_to_target;
    j["control_energy"] = energy.J;
    j["delta_chi"] = energy.delta_chi;
    j["slack"] = energy.slack;
    return j.dump(2);
}

void ReverseResult::write_steps_csv(std::ostream& out) const {
    out << "s,mean,variance,w2_to_forward_marginal\n" << std::setprecision(17);
    for (const auto& e : path) {
        out << e.s << ',' << mean(e.measure) << ',' << variance(e.measure) << ',' << e.w2_to_forward << '\n';
    }
}

double appendix_b_reverse_drift(double a, const Schedule& s, double t, double x) {
    const auto [beta, lambda] = s(t);
    if (!(lambda > 0.0)) throw DomainError("closed-form reverse drift is singular at Λ(t) = 0");
    const double e = std::exp(-lambda);
    const double denom = -std::expm1(-lambda);
    return 0.5 * beta * (e / denom * x - std::exp(-0.5 * lambda) * a / denom);
}

DriftVariants drift_variants(const FlowTrajectory& traj, double a, double s, double x) {
    traj.validate();
    const double t = forward_time(traj, s);
    const double beta = traj.schedule.beta(t);
    const ReverseField field(traj);
    const double xi = 2.0 * field.hilbert(t, x);
    return {field.velocity(t, beta, x), -0.5 * beta * x - beta * xi, appendix_b_reverse_drift(a, traj.schedule, t, x)};
}

}  // namespace freeflow
