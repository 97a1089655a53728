#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

namespace amplasso {

struct QuadratureOptions {
    double abs_tol = 1e-10;
    int max_intervals = 4000;
    /// Half-width of the integration window, in effective standard deviations.
    double truncation_sd = 10.0;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
};

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Globally adaptive 7/15-point Gauss-Kronrod integration of f over [a, b].
/// The panel with the largest error estimate is bisected until the summed
/// error estimate drops below abs_tol. Throws QuadratureError when f returns
/// a non-finite value.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           const QuadratureOptions& opts = {});

/// Same as integrate(), but [a, b] is first split at every breakpoint that
/// falls strictly inside it so each starting panel is smooth.
QuadratureResult integrate_with_breaks(const std::function<double(double)>& f, double a,
                                       double b, std::span<const double> breaks,
                                       const QuadratureOptions& opts = {});

}  // namespace amplasso
