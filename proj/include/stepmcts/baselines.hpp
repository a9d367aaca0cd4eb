#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stepmcts/evaluation.hpp"
#include "stepmcts/step_scoring.hpp"
#include "stepmcts/trainer.hpp"

namespace stepmcts {

enum class Method { ZeroShot, Rft, StepDpo, Ours };

std::string_view method_name(Method method);
/// "zero_shot", "rft", "step_dpo" or "ours"; throws std::invalid_argument otherwise.
Method parse_method(std::string_view name);

struct BaselineConfig {
    int rft_samples = 8;
    double rft_temperature = 1.0;
    double dpo_beta = 0.1;

    void validate() const;
};

/// Samples `samples_per_problem` full solutions per problem and keeps the
/// verified-correct ones, deduplicated per problem. Every (x, prefix, step)
/// of a kept solution becomes a record with score 1.0. Sample j of problem i
/// uses derive_seed(seed, "rft", i, j).
std::vector<TrainingExample> rft_generate(const PolicyParams& params, std::span<const Problem> problems,
                                          const ReasoningDomain& domain, int samples_per_problem,
                                          double temperature, int depth_cap, std::uint64_t seed, int threads = 1);

struct PreferencePair {
    std::string problem;
    Partial partial;
    std::string chosen;
    std::string rejected;

    bool operator==(const PreferencePair&) const = default;
};

/// At most one pair from the root's visited children: the strictly highest
/// and strictly lowest mean reward Q/N. Ties at either end yield no pair.
std::vector<PreferencePair> stepdpo_pairs(const SearchTree& tree);

/// A pair resolved against its candidate set.
struct PreparedPair {
    StepContext context;
    std::size_t chosen = 0;
    std::size_t rejected = 0;
};

std::vector<PreparedPair> prepare_pairs(std::span<const PreferencePair> pairs, const ReasoningDomain& domain);

/// Mean of -log sigmoid(beta * ((lp_w - lpref_w) - (lp_l - lpref_l))).
double dpo_loss(const PolicyParams& params, const PolicyParams& params_ref, std::span<const PreparedPair> pairs,
                double beta);
std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& params_ref,
                             std::span<const PreparedPair> pairs, double beta);

double dpo_loss(const PolicyParams& params, const PolicyParams& params_ref, std::span<const PreferencePair> pairs,
                const ReasoningDomain& domain, double beta);
std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& params_ref,
                             std::span<const PreferencePair> pairs, const ReasoningDomain& domain, double beta);

/// Per-iteration accuracies of one method. `params` parallels `iterations`.
struct MethodRun {
    Method method = Method::ZeroShot;
    EvalResult initial_eval;
    std::vector<int> iterations;
    std::vector<EvalResult> evals;
    std::vector<PolicyParams> params;
    std::vector<std::size_t> dataset_sizes;
    std::size_t best = 0;
    std::string stop_reason;
};

struct MethodSetup {
    SearchConfig search;
    ScoringConfig scoring;
    TrainConfig train;
    EvalConfig eval;
    BaselineConfig baseline;
    int threads = 1;
};

/// zero_shot: evaluates `initial` (iteration 0).
/// rft: one round of rejection sampling on train.problems_per_iteration pool
///      problems, then SFT (kl_weight 0), iteration 1.
/// step_dpo: the iterative scaffold with best/worst preference pairs and DPO
///      against the previous iteration's policy.
/// ours: run_self_training.
MethodRun run_method(Method method, const PolicyParams& initial, std::span<const Problem> pool,
                     std::span<const Problem> eval_problems, const ReasoningDomain& domain, const MethodSetup& setup);

/// Evaluation of a policy trained on one family against problems of another.
/// Throws std::invalid_argument when the families coincide.
EvalResult transfer_eval(const PolicyParams& params, Family trained_on, std::span<const Problem> problems,
                         const ReasoningDomain& domain, const EvalConfig& eval, int threads = 1);

}  // namespace stepmcts
