#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "amplasso/quadrature.hpp"
#include "amplasso/rng.hpp"

namespace amplasso {

struct GaussianComponent {
    double mean = 0.0;
    double var = 0.0;
};

struct PointComponent {
    double location = 0.0;
};

struct MixtureComponent {
    double weight = 1.0;
    std::variant<GaussianComponent, PointComponent> kind;

    /// Mean and variance of the component (variance 0 for a point mass).
    double mean() const;
    double var() const;
};

/// Sparse mixture prior (1 - epsilon) delta_0 + epsilon * Pi_1 where Pi_1 is a
/// finite mixture of Gaussians and nonzero point masses.
struct PriorSpec {
    double epsilon = 0.0;
    std::vector<MixtureComponent> components;

    static PriorSpec gaussian(double epsilon, double mean, double var);
    static PriorSpec point(double epsilon, double location);
};

class InvalidPrior : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Throws InvalidPrior when weights are negative or do not sum to one
/// (1e-12), a point mass sits at zero, a variance is negative, or epsilon
/// leaves [0, 1].
void validate(const PriorSpec& spec);

/// True when the prior is invariant under negation.
bool is_symmetric(const PriorSpec& spec, double tol = 1e-12);

/// Largest |mean| over the nonzero components (0 when there are none).
double furthest_mean(const PriorSpec& spec);

PriorSpec prior_from_json_text(const std::string& text);
PriorSpec load_prior(const std::string& path);
std::string prior_to_json_text(const PriorSpec& spec);

using ScalarRV = double;

/// n i.i.d. draws from the prior; exact zeros for the null atom.
std::vector<ScalarRV> sample_prior(const PriorSpec& spec, std::size_t n, std::uint64_t seed);
std::vector<ScalarRV> sample_prior(const PriorSpec& spec, std::size_t n, Rng& rng);

/// psi(denoised, truth)
using Psi = std::function<double(double, double)>;

/// E[psi(eta_{alpha tau}(Pi + tau Z), Pi)] by adaptive quadrature.
///
/// Each mixture component is handled separately. For the null atom and point
/// masses the expectation is a single integral over x = Pi + tau Z. For a
/// Gaussian component the pair (x, Pi) is jointly Gaussian, so the outer
/// integral runs over x ~ N(m, v + tau^2) and an inner one over Pi | x.
/// Outer panels are split at the soft-threshold kinks +-alpha*tau.
double expect_psi(const PriorSpec& spec, double alpha, double tau, const Psi& psi,
                  const QuadratureOptions& opts = {});

/// P(|Pi_1 + tau Z| >= alpha tau + extra), in closed form.
double tail_prob_nonnull(const PriorSpec& spec, double alpha, double tau, double extra);

}  // namespace amplasso
