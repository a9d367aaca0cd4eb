#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stepmcts/rng.hpp"
#include "stepmcts/toy_domain.hpp"

namespace stepmcts {

/// Weights of the linear-softmax step policy. Stands in for the language
/// model: logit(s | x, p) = weights . features(x, p, s).
struct PolicyParams {
    std::vector<double> weights;

    static PolicyParams zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0)}; }
    bool operator==(const PolicyParams&) const = default;
};

/// Throws std::invalid_argument on a dimension mismatch or non-finite entry.
void check_params(const PolicyParams& params, std::size_t dim);

/// Every candidate at one (problem, partial) context, as a row-major feature
/// matrix. Building it is the only call into the domain; all policy math
/// below works on contexts.
struct StepContext {
    std::vector<std::string> candidates;
    std::vector<double> features;
    std::vector<char> is_final;
    std::size_t dim = 0;

    std::size_t size() const { return candidates.size(); }
    std::span<const double> row(std::size_t k) const { return {features.data() + k * dim, dim}; }
    /// Index of `step` among the candidates, or size() when absent.
    std::size_t index_of(std::string_view step) const;
};

/// Throws std::invalid_argument when the domain offers no candidates.
StepContext make_context(const ReasoningDomain& domain, std::string_view problem_text,
                         std::span<const std::string> partial);

std::vector<double> logits(const PolicyParams& params, const StepContext& ctx);

/// Numerically stable log-softmax of logits / temperature.
std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0);

/// Full distribution at a context.
struct StepDistribution {
    std::vector<std::string> candidates;
    std::vector<double> logits;
    std::vector<double> probs;
};

StepDistribution step_distribution(const PolicyParams& params, const StepContext& ctx, double temperature = 1.0);

struct StepLogProbs {
    std::vector<std::string> candidates;
    std::vector<double> logprobs;
};

/// Training-time (temperature 1) log-probabilities over the candidate set.
StepLogProbs step_logprobs(const PolicyParams& params, std::string_view problem_text,
                           std::span<const std::string> partial, const ReasoningDomain& domain);

/// Below this temperature sampling degenerates to argmax.
inline constexpr double kGreedyTemperature = 1e-6;

/// Categorical draw from softmax(logits / temperature). Throws
/// std::invalid_argument for temperature <= 0. Greedy ties go to the lowest index.
std::size_t sample_index(std::span<const double> logits, double temperature, Rng& rng);

std::string sample_step(const PolicyParams& params, std::string_view problem_text,
                        std::span<const std::string> partial, const ReasoningDomain& domain,
                        double temperature, Rng& rng);

/// Exact KL(pi_new || pi_ref) over the candidate set.
double kl_divergence(const PolicyParams& params_new, const PolicyParams& params_ref, const StepContext& ctx);

double kl_to_reference(const PolicyParams& params_new, const PolicyParams& params_ref,
                       std::string_view problem_text, std::span<const std::string> partial,
                       const ReasoningDomain& domain);

/// grad += scale * d log pi(candidate k) / d weights
///       = scale * (phi_k - sum_j p_j phi_j)
void add_logprob_gradient(const StepContext& ctx, std::span<const double> probs, std::size_t k,
                          double scale, std::span<double> grad);

/// grad += scale * d KL(pi_new || pi_ref) / d weights_new, where
/// dKL/dlogit_i = p_i (log p_i - log q_i - KL).
void add_kl_gradient(const StepContext& ctx, std::span<const double> logp_new, std::span<const double> logp_ref,
                     double scale, std::span<double> grad);

}  // namespace stepmcts
