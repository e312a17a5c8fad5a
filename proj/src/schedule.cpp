#include "freeflow/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "freeflow/errors.hpp"

namespace freeflow {

std::string to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::linear: return "linear";
        case ScheduleKind::cosine: return "cosine";
    }
    return "unknown";
}

Schedule::Schedule(ScheduleKind kind, std::vector<double> params, double horizon)
    : kind_(kind), params_(std::move(params)), horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw DomainError("schedule horizon T must be positive");
}

Schedule Schedule::constant(double beta, double horizon) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("β must be positive");
    return Schedule(ScheduleKind::constant, {beta}, horizon);
}

Schedule Schedule::linear(double beta_start, double beta_end, double horizon) {
    if (!(beta_start >= 0.0) || !(beta_end > 0.0) || !std::isfinite(beta_start) || !std::isfinite(beta_end)) {
        throw DomainError("β must be positive (linear schedules allow β = 0 only at t = 0)");
    }
    return Schedule(ScheduleKind::linear, {beta_start, beta_end}, horizon);
}

Schedule Schedule::cosine(double horizon, double offset, double max_angle_fraction) {
    if (!(offset >= 0.0)) throw DomainError("cosine schedule offset must be nonnegative");
    const double theta0 = offset / (1.0 + offset);
    if (!(max_angle_fraction > theta0) || !(max_angle_fraction < 1.0)) {
        throw DomainError("cosine schedule requires offset/(1+offset) < max_angle_fraction < 1");
    }
    return Schedule(ScheduleKind::cosine, {offset, max_angle_fraction}, horizon);
}

Schedule::Value Schedule::operator()(double t) const {
    const double slack = 1e-12 * horizon_;
    if (!(t >= -slack && t <= horizon_ + slack)) {
        throw DomainError("time " + std::to_string(t) + " outside schedule range [0, " + std::to_string(horizon_) + "]");
    }
    t = std::clamp(t, 0.0, horizon_);
    switch (kind_) {
        case ScheduleKind::constant:
            return {params_[0], params_[0] * t};
        case ScheduleKind::linear: {
            const double b0 = params_[0];
            const double slope = (params_[1] - b0) / horizon_;
            return {b0 + slope * t, b0 * t + 0.5 * slope * t * t};
        }
        case ScheduleKind::cosine: {
            const double half_pi = 0.5 * std::numbers::pi;
            const double theta0 = params_[0] / (1.0 + params_[0]) * half_pi;
            const double theta1 = params_[1] * half_pi;
            const double rate = (theta1 - theta0) / horizon_;
            const double theta = theta0 + rate * t;
            return {2.0 * rate * std::tan(theta), 2.0 * std::log(std::cos(theta0) / std::cos(theta))};
        }
    }
    throw DomainError("unknown schedule kind");
}

double Schedule::time_at_Lambda(double target) const {
    const double total = Lambda(horizon_);
    if (!(target >= 0.0) || target > total * (1.0 + 1e-12)) throw DomainError("Λ target outside schedule range");
    double lo = 0.0, hi = horizon_;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * horizon_; ++it) {
        const double mid = 0.5 * (lo + hi);
        (Lambda(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Schedule Schedule::with_horizon(double horizon) const { return Schedule(kind_, params_, horizon); }

Schedule::Value schedule_eval(const Schedule& s, double t) { return s(t); }

}  // namespace freeflow
