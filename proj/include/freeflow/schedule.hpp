#pragma once

#include <string>
#include <vector>

namespace freeflow {

enum class ScheduleKind { constant, linear, cosine };

std::string to_string(ScheduleKind kind);

// Noise schedule beta(t) on [0, T] with closed-form integral
// Lambda(t) = int_0^t beta(r) dr.
class Schedule {
public:
    struct Value {
        double beta;
        double Lambda;
    };

    static Schedule constant(double beta, double horizon);
    // beta(t) = beta_start + (beta_end - beta_start) t / T. beta_start may be
    // zero; Lambda is still strictly increasing.
    static Schedule linear(double beta_start, double beta_end, double horizon);
    // Lambda(t) = 2 log(cos(theta_0) / cos(theta(t))) with theta(t) rising
    // linearly from theta_0 = offset/(1 + offset) * pi/2 to
    // max_angle_fraction * pi/2.
    static Schedule cosine(double horizon, double offset = 0.008, double max_angle_fraction = 0.95);

    ScheduleKind kind() const noexcept { return kind_; }
    double horizon() const noexcept { return horizon_; }
    const std::vector<double>& parameters() const noexcept { return params_; }

    // Throws DomainError when t lies outside [0, T].
    Value operator()(double t) const;
    double beta(double t) const { return (*this)(t).beta; }
    double Lambda(double t) const { return (*this)(t).Lambda; }

    // Inverse of Lambda on [0, Lambda(T)].
    double time_at_Lambda(double target) const;

    // Same schedule with a different horizon (parameters unchanged).
    Schedule with_horizon(double horizon) const;

private:
    Schedule(ScheduleKind kind, std::vector<double> params, double horizon);

    ScheduleKind kind_;
    std::vector<double> params_;
    double horizon_;
};

Schedule::Value schedule_eval(const Schedule& s, double t);

}  // namespace freeflow
