#pragma once

// Test-only reference computations. Nothing here calls into the solver code
// paths it is used to check, apart from drawing prior samples.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "amplasso/prior.hpp"

namespace oracle {

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
};

inline double soft(double x, double t)
{
    const double m = std::abs(x) - t;
    return m > 0.0 ? std::copysign(m, x) : 0.0;
}

/// Monte Carlo estimate of E[psi(eta_{alpha tau}(Pi + tau Z), Pi)].
inline McEstimate monte_carlo_psi(const amplasso::PriorSpec& spec, double alpha, double tau,
                                  const std::function<double(double, double)>& psi,
                                  std::size_t samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t chunk = 1 << 20;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t done = 0;
    while (done < samples) {
        const std::size_t m = std::min(chunk, samples - done);
        const auto beta = amplasso::sample_prior(spec, m, rng());
        for (double b : beta) {
            const double v = psi(soft(b + tau * z(rng), alpha * tau), b);
            sum += v;
            sum_sq += v * v;
        }
        done += m;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(sum_sq / n - mean * mean, 0.0);
    return {mean, std::sqrt(var / n)};
}

/// Plain bisection for a root of a function that changes sign on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13)
{
    double f_lo = f(lo);
    for (int i = 0; i < 400 && hi - lo > tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000)
{
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

}  // namespace oracle

namespace fixtures {

using amplasso::GaussianComponent;
using amplasso::MixtureComponent;
using amplasso::PointComponent;
using amplasso::PriorSpec;

/// 0.9 delta_0 + 0.1 N(3.5, 1)
inline PriorSpec sparse_gaussian() { return PriorSpec::gaussian(0.1, 3.5, 1.0); }

/// 0.9 delta_0 + 0.1 (0.2 N(-3.6, 1) + 0.8 N(4, 1))
inline PriorSpec bimodal()
{
    return PriorSpec{0.1,
                     {MixtureComponent{0.2, GaussianComponent{-3.6, 1.0}},
                      MixtureComponent{0.8, GaussianComponent{4.0, 1.0}}}};
}

/// 0.9 delta_0 + 0.1 delta_{-4.3}
inline PriorSpec point_mass() { return PriorSpec::point(0.1, -4.3); }

/// 0.9 delta_0 + 0.1 (0.2 delta_{-2} + 0.8 delta_3)
inline PriorSpec two_points()
{
    return PriorSpec{0.1,
                     {MixtureComponent{0.2, PointComponent{-2.0}},
                      MixtureComponent{0.8, PointComponent{3.0}}}};
}

inline std::vector<PriorSpec> reference_priors() { return {sparse_gaussian(), bimodal(), point_mass(), two_points()}; }

}  // namespace fixtures
