#include "amplasso/prior.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "amplasso/normal.hpp"
#include "json.hpp"

namespace amplasso {

using nlohmann::json;

double MixtureComponent::mean() const
{
    if (const auto* g = std::get_if<GaussianComponent>(&kind))
        return g->mean;
    return std::get<PointComponent>(kind).location;
}

double MixtureComponent::var() const
{
    if (const auto* g = std::get_if<GaussianComponent>(&kind))
        return g->var;
    return 0.0;
}

PriorSpec PriorSpec::gaussian(double epsilon, double mean, double var)
{
    return PriorSpec{epsilon, {MixtureComponent{1.0, GaussianComponent{mean, var}}}};
}

PriorSpec PriorSpec::point(double epsilon, double location)
{
    return PriorSpec{epsilon, {MixtureComponent{1.0, PointComponent{location}}}};
}

void validate(const PriorSpec& spec)
{
    if (!(spec.epsilon >= 0.0 && spec.epsilon <= 1.0))
        throw InvalidPrior("epsilon must lie in [0, 1], got " + std::to_string(spec.epsilon));
    if (spec.components.empty()) {
        if (spec.epsilon > 0.0)
            throw InvalidPrior("epsilon > 0 requires at least one nonzero component");
        return;
    }
    double total = 0.0;
    for (const auto& c : spec.components) {
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            throw InvalidPrior("component weights must be nonnegative");
        total += c.weight;
        if (const auto* g = std::get_if<GaussianComponent>(&c.kind)) {
            if (!(g->var >= 0.0) || !std::isfinite(g->var) || !std::isfinite(g->mean))
                throw InvalidPrior("gaussian component needs finite mean and var >= 0");
            if (g->var == 0.0 && g->mean == 0.0)
                throw InvalidPrior("degenerate gaussian at zero puts mass on 0");
        } else {
            const double loc = std::get<PointComponent>(c.kind).location;
            if (loc == 0.0 || !std::isfinite(loc))
                throw InvalidPrior("point-mass location must be finite and nonzero");
        }
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw InvalidPrior("component weights sum to " + std::to_string(total) + ", not 1");
}

bool is_symmetric(const PriorSpec& spec, double tol)
{
    // Every component must be matched by its mirror image with equal weight.
    for (const auto& c : spec.components) {
        double own = 0.0;
        double mirror = 0.0;
        for (const auto& d : spec.components) {
            if (d.kind.index() != c.kind.index() || std::abs(d.var() - c.var()) > tol)
                continue;
            if (std::abs(d.mean() - c.mean()) <= tol)
                own += d.weight;
            if (std::abs(d.mean() + c.mean()) <= tol)
                mirror += d.weight;
        }
        if (std::abs(own - mirror) > tol)
            return false;
    }
    return true;
}

double furthest_mean(const PriorSpec& spec)
{
    double out = 0.0;
    for (const auto& c : spec.components)
        out = std::max(out, std::abs(c.mean()));
    return out;
}

PriorSpec prior_from_json_text(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidPrior(std::string("malformed prior JSON: ") + e.what());
    }
    PriorSpec spec;
    try {
        spec.epsilon = j.at("epsilon").get<double>();
        for (const auto& c : j.at("components")) {
            MixtureComponent comp;
            comp.weight = c.at("w").get<double>();
            if (c.contains("gaussian")) {
                const auto& g = c["gaussian"];
                comp.kind = GaussianComponent{g.at("mean").get<double>(), g.at("var").get<double>()};
            } else if (c.contains("point")) {
                comp.kind = PointComponent{c["point"].get<double>()};
            } else {
                throw InvalidPrior("component needs a \"gaussian\" or \"point\" entry");
            }
            spec.components.push_back(comp);
        }
    } catch (const json::exception& e) {
        throw InvalidPrior(std::string("malformed prior JSON: ") + e.what());
    }
    validate(spec);
    return spec;
}

PriorSpec load_prior(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open prior file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return prior_from_json_text(buf.str());
}

std::string prior_to_json_text(const PriorSpec& spec)
{
    json comps = json::array();
    for (const auto& c : spec.components) {
        if (const auto* g = std::get_if<GaussianComponent>(&c.kind))
            comps.push_back({{"w", c.weight}, {"gaussian", {{"mean", g->mean}, {"var", g->var}}}});
        else
            comps.push_back({{"w", c.weight}, {"point", std::get<PointComponent>(c.kind).location}});
    }
    json j = {{"epsilon", spec.epsilon}, {"components", comps}};
    return j.dump();
}

std::vector<ScalarRV> sample_prior(const PriorSpec& spec, std::size_t n, Rng& rng)
{
    validate(spec);
    if (n == 0)
        throw std::invalid_argument("sample_prior: n must be at least 1");
    std::vector<ScalarRV> out(n, 0.0);
    if (spec.epsilon == 0.0)
        return out;
    std::vector<double> weights;
    for (const auto& c : spec.components)
        weights.push_back(c.weight);
    std::bernoulli_distribution nonnull(spec.epsilon);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& value : out) {
        if (!nonnull(rng))
            continue;
        const auto& c = spec.components[pick(rng)];
        value = c.var() > 0.0 ? c.mean() + std::sqrt(c.var()) * gauss(rng) : c.mean();
    }
    return out;
}

std::vector<ScalarRV> sample_prior(const PriorSpec& spec, std::size_t n, std::uint64_t seed)
{
    Rng rng = make_rng(seed);
    return sample_prior(spec, n, rng);
}

namespace {

struct ComponentView {
    double weight;
    double mean;
    double var;
};

// The null atom plus the nonzero components, with absolute weights.
std::vector<ComponentView> flatten(const PriorSpec& spec)
{
    std::vector<ComponentView> out;
    if (spec.epsilon < 1.0)
        out.push_back({1.0 - spec.epsilon, 0.0, 0.0});
    if (spec.epsilon > 0.0)
        for (const auto& c : spec.components)
            if (c.weight > 0.0)
                out.push_back({spec.epsilon * c.weight, c.mean(), c.var()});
    return out;
}

double soft(double x, double t)
{
    const double mag = std::abs(x) - t;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

}  // namespace

double expect_psi(const PriorSpec& spec, double alpha, double tau, const Psi& psi,
                  const QuadratureOptions& opts)
{
    validate(spec);
    if (!(tau > 0.0) || !(alpha >= 0.0))
        throw std::invalid_argument("expect_psi requires tau > 0 and alpha >= 0");
    const double theta = alpha * tau;
    const std::array<double, 2> kinks{-theta, theta};
    const double width = opts.truncation_sd;

    QuadratureOptions outer = opts;
    outer.abs_tol = 0.5 * opts.abs_tol;
    QuadratureOptions inner = opts;
    inner.abs_tol = 0.5 * opts.abs_tol;

    double total = 0.0;
    for (const auto& c : flatten(spec)) {
        double part;
        if (c.var == 0.0) {
            const double mu = c.mean;
            auto f = [&](double x) { return psi(soft(x, theta), mu) * gaussian_density(x, mu, tau); };
            part = integrate_with_breaks(f, mu - width * tau, mu + width * tau, kinks, outer).value;
        } else {
            const double s = std::sqrt(c.var + tau * tau);
            const double gain = c.var / (s * s);
            const double cond_sd = std::sqrt(c.var) * tau / s;
            auto f = [&](double x) {
                const double denoised = soft(x, theta);
                const double cond_mean = c.mean + gain * (x - c.mean);
                auto g = [&](double y) { return psi(denoised, y) * gaussian_density(y, cond_mean, cond_sd); };
                const double in = integrate(g, cond_mean - width * cond_sd, cond_mean + width * cond_sd, inner).value;
                return in * gaussian_density(x, c.mean, s);
            };
            part = integrate_with_breaks(f, c.mean - width * s, c.mean + width * s, kinks, outer).value;
        }
        total += c.weight * part;
    }
    return total;
}

double tail_prob_nonnull(const PriorSpec& spec, double alpha, double tau, double extra)
{
    if (!(tau > 0.0) || !(extra >= 0.0))
        throw std::invalid_argument("tail_prob_nonnull requires tau > 0 and extra >= 0");
    const double cut = alpha * tau + extra;
    double out = 0.0;
    for (const auto& c : spec.components) {
        const double sd = std::sqrt(c.var() + tau * tau);
        out += c.weight * gaussian_two_sided_tail(c.mean(), sd, cut);
    }
    return out;
}

}  // namespace amplasso
