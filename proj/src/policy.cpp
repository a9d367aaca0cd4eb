#include "stepmcts/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stepmcts {

void check_params(const PolicyParams& params, std::size_t dim) {
    if (params.weights.size() != dim)
        throw std::invalid_argument("policy has " + std::to_string(params.weights.size()) +
                                    " weights, domain feature dimension is " + std::to_string(dim));
    for (double w : params.weights)
        if (!std::isfinite(w)) throw std::invalid_argument("policy weight is not finite");
}

std::size_t StepContext::index_of(std::string_view step) const {
    auto it = std::find(candidates.begin(), candidates.end(), step);
    return static_cast<std::size_t>(it - candidates.begin());
}

StepContext make_context(const ReasoningDomain& domain, std::string_view problem_text,
                         std::span<const std::string> partial) {
    auto options = domain.step_options(problem_text, partial);
    if (options.empty()) throw std::invalid_argument("domain offered no candidate steps");
    StepContext ctx;
    ctx.dim = domain.feature_dim();
    ctx.candidates.reserve(options.size());
    ctx.features.reserve(options.size() * ctx.dim);
    for (auto& o : options) {
        if (o.features.size() != ctx.dim) throw std::logic_error("feature vector has wrong dimension");
        ctx.candidates.push_back(std::move(o.text));
        ctx.features.insert(ctx.features.end(), o.features.begin(), o.features.end());
        ctx.is_final.push_back(o.is_final ? 1 : 0);
    }
    return ctx;
}

std::vector<double> logits(const PolicyParams& params, const StepContext& ctx) {
    if (params.weights.size() != ctx.dim) check_params(params, ctx.dim);
    std::vector<double> out(ctx.size());
    for (std::size_t k = 0; k < ctx.size(); ++k) {
        const auto phi = ctx.row(k);
        double z = 0.0;
        for (std::size_t d = 0; d < ctx.dim; ++d) z += params.weights[d] * phi[d];
        out[k] = z;
    }
    return out;
}

std::vector<double> log_softmax(std::span<const double> z, double temperature) {
    std::vector<double> out(z.size());
    if (z.empty()) return out;
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v / temperature);
    double s = 0.0;
    for (double v : z) s += std::exp(v / temperature - m);
    const double lse = m + std::log(s);
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] / temperature - lse;
    return out;
}

StepDistribution step_distribution(const PolicyParams& params, const StepContext& ctx, double temperature) {
    StepDistribution dist;
    dist.candidates = ctx.candidates;
    dist.logits = logits(params, ctx);
    auto lp = log_softmax(dist.logits, temperature);
    dist.probs.resize(lp.size());
    std::transform(lp.begin(), lp.end(), dist.probs.begin(), [](double v) { return std::exp(v); });
    return dist;
}

StepLogProbs step_logprobs(const PolicyParams& params, std::string_view problem_text,
                           std::span<const std::string> partial, const ReasoningDomain& domain) {
    const auto ctx = make_context(domain, problem_text, partial);
    return {ctx.candidates, log_softmax(logits(params, ctx))};
}

std::size_t sample_index(std::span<const double> z, double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw std::invalid_argument("sampling temperature must be > 0");
    if (z.empty()) throw std::invalid_argument("cannot sample from an empty candidate set");
    if (temperature < kGreedyTemperature)
        return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const auto lp = log_softmax(z, temperature);
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t k = 0; k < lp.size(); ++k) {
        acc += std::exp(lp[k]);
        if (u < acc) return k;
    }
    return lp.size() - 1;  // rounding: u landed past the final cumulative sum
}

std::string sample_step(const PolicyParams& params, std::string_view problem_text,
                        std::span<const std::string> partial, const ReasoningDomain& domain,
                        double temperature, Rng& rng) {
    if (!(temperature > 0.0)) throw std::invalid_argument("sampling temperature must be > 0");
    const auto ctx = make_context(domain, problem_text, partial);
    return ctx.candidates[sample_index(logits(params, ctx), temperature, rng)];
}

double kl_divergence(const PolicyParams& params_new, const PolicyParams& params_ref, const StepContext& ctx) {
    const auto lp = log_softmax(logits(params_new, ctx));
    const auto lq = log_softmax(logits(params_ref, ctx));
    double kl = 0.0;
    for (std::size_t k = 0; k < lp.size(); ++k) kl += std::exp(lp[k]) * (lp[k] - lq[k]);
    return kl;
}

double kl_to_reference(const PolicyParams& params_new, const PolicyParams& params_ref,
                       std::string_view problem_text, std::span<const std::string> partial,
                       const ReasoningDomain& domain) {
    check_params(params_new, domain.feature_dim());
    check_params(params_ref, domain.feature_dim());
    return kl_divergence(params_new, params_ref, make_context(domain, problem_text, partial));
}

void add_logprob_gradient(const StepContext& ctx, std::span<const double> probs, std::size_t k, double scale,
                          std::span<double> grad) {
    const auto phi_k = ctx.row(k);
    for (std::size_t d = 0; d < ctx.dim; ++d) grad[d] += scale * phi_k[d];
    for (std::size_t j = 0; j < ctx.size(); ++j) {
        const auto phi = ctx.row(j);
        const double s = scale * probs[j];
        for (std::size_t d = 0; d < ctx.dim; ++d) grad[d] -= s * phi[d];
    }
}

void add_kl_gradient(const StepContext& ctx, std::span<const double> logp_new, std::span<const double> logp_ref,
                     double scale, std::span<double> grad) {
    double kl = 0.0;
    for (std::size_t k = 0; k < logp_new.size(); ++k) kl += std::exp(logp_new[k]) * (logp_new[k] - logp_ref[k]);
    for (std::size_t i = 0; i < ctx.size(); ++i) {
        const double dz = std::exp(logp_new[i]) * (logp_new[i] - logp_ref[i] - kl);
        const auto phi = ctx.row(i);
        for (std::size_t d = 0; d < ctx.dim; ++d) grad[d] += scale * dz * phi[d];
    }
}

}  // namespace stepmcts
