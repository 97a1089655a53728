#pragma once

#include <cmath>
#include <numbers>

namespace amplasso {

/// Standard normal density.
inline double normal_pdf(double x)
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF, accurate in both tails.
inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Density of N(mean, sd^2) at x.
inline double gaussian_density(double x, double mean, double sd)
{
    return normal_pdf((x - mean) / sd) / sd;
}

/// P(a < D < b) and the first two partial moments E[D 1{a<D<b}],
/// E[D^2 1{a<D<b}] for D ~ N(0, sd^2). Infinite endpoints are allowed.
struct PartialMoments {
    double m0 = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
};

PartialMoments gaussian_partial_moments(double sd, double a, double b);

/// Probability that N(mean, sd^2) falls outside [-threshold, threshold].
double gaussian_two_sided_tail(double mean, double sd, double threshold);

/// Probability that N(mean, sd^2) falls in (a, b).
double gaussian_interval_prob(double mean, double sd, double a, double b);

}  // namespace amplasso
