#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "freeflow/measure.hpp"

namespace testing {

inline freeflow::GridMeasure sc(double m, double v, std::size_t n = 512, double padding = 0.5) {
    return freeflow::semicircle_to_grid(freeflow::make_semicircle(m, v), n, padding);
}

// Fine unpadded semicircle used as a W2 reference.
inline freeflow::GridMeasure sc_ref(double m, double v) { return sc(m, v, 4096, 0.0); }

// Grid law with a density given pointwise.
template <class F>
freeflow::GridMeasure grid_from(double a, double b, std::size_t n, F&& f) {
    std::vector<double> rho(n);
    const double dx = (b - a) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = f(a + (static_cast<double>(i) + 0.5) * dx);
    return freeflow::GridMeasure::normalized(a, b, std::move(rho));
}

inline const double kPi = std::acos(-1.0);

}  // namespace testing
