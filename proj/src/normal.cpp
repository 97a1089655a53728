#include "amplasso/normal.hpp"

#include <limits>

namespace amplasso {

namespace {

// u * phi(u), with the limit 0 at +-inf.
double scaled_pdf(double u)
{
    if (!std::isfinite(u))
        return 0.0;
    return u * normal_pdf(u);
}

double pdf_or_zero(double u)
{
    return std::isfinite(u) ? normal_pdf(u) : 0.0;
}

}  // namespace

PartialMoments gaussian_partial_moments(double sd, double a, double b)
{
    PartialMoments out;
    if (!(b > a))
        return out;
    const double u = a / sd;
    const double w = b / sd;
    // Differences of upper tails are more accurate when both endpoints sit
    // in the right tail.
    double mass;
    if (u > 0.0)
        mass = normal_cdf(-u) - normal_cdf(-w);
    else
        mass = normal_cdf(w) - normal_cdf(u);
    out.m0 = mass;
    out.m1 = sd * (pdf_or_zero(u) - pdf_or_zero(w));
    out.m2 = sd * sd * (mass + scaled_pdf(u) - scaled_pdf(w));
    return out;
}

double gaussian_two_sided_tail(double mean, double sd, double threshold)
{
    return normal_cdf((-threshold - mean) / sd) + normal_cdf((mean - threshold) / sd);
}

double gaussian_interval_prob(double mean, double sd, double a, double b)
{
    if (!(b > a))
        return 0.0;
    const double u = (a - mean) / sd;
    const double w = (b - mean) / sd;
    if (u > 0.0)
        return normal_cdf(-u) - normal_cdf(-w);
    return normal_cdf(w) - normal_cdf(u);
}

}  // namespace amplasso
