#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stepmcts/evaluation.hpp"
#include "stepmcts/policy.hpp"
#include "stepmcts/step_scoring.hpp"

namespace stepmcts {

struct TrainConfig {
    double learning_rate = 1.0;
    int epochs = 4;
    int batch_size = 32;
    double kl_weight = 1.0;
    int problems_per_iteration = 100;
    int max_iterations = 3;
    std::uint64_t rng_seed = 0;
    bool early_stop = true;

    void validate() const;
};

/// A training record resolved against its candidate set.
struct PreparedRecord {
    StepContext context;
    std::size_t chosen = 0;
    double score = 0.0;
};

/// Throws std::invalid_argument when a record's step is not a candidate at
/// its (problem, partial) context.
std::vector<PreparedRecord> prepare_records(std::span<const TrainingExample> records, const ReasoningDomain& domain);

/// Mean over `records` of  -r * log pi(s | x, p) + kl_weight * KL(pi(.|x,p) || pi_prev(.|x,p)).
double weighted_nll_kl_loss(const PolicyParams& params, const PolicyParams& params_prev,
                            std::span<const PreparedRecord> records, double kl_weight);

/// Analytic gradient of weighted_nll_kl_loss with respect to params.
std::vector<double> weighted_nll_kl_grad(const PolicyParams& params, const PolicyParams& params_prev,
                                         std::span<const PreparedRecord> records, double kl_weight);

double loss(const PolicyParams& params, const PolicyParams& params_prev, std::span<const TrainingExample> batch,
            const ReasoningDomain& domain, double kl_weight);

std::vector<double> grad(const PolicyParams& params, const PolicyParams& params_prev,
                         std::span<const TrainingExample> batch, const ReasoningDomain& domain, double kl_weight);

/// Objective over an indexed item set: value and gradient are means over the
/// selected indices.
struct Objective {
    std::size_t size = 0;
    std::function<double(const PolicyParams&, std::span<const std::size_t>)> value;
    std::function<std::vector<double>(const PolicyParams&, std::span<const std::size_t>)> gradient;
};

struct TrainTrace {
    double initial_loss = 0.0;
    std::vector<double> epoch_losses;  ///< full-set loss after each epoch
    int rejected_epochs = 0;
    double final_learning_rate = 0.0;
};

/// Shuffled mini-batch gradient descent. After each epoch the full-set loss is
/// compared with the previous epoch; an epoch that raised it (or produced a
/// non-finite value) is rolled back and the learning rate halves.
PolicyParams minimize(const PolicyParams& start, const Objective& objective, const TrainConfig& config,
                      TrainTrace* trace = nullptr);

/// One training iteration from params_prev, with the KL reference frozen at
/// params_prev. Throws std::invalid_argument for an empty dataset.
PolicyParams train_iteration(const PolicyParams& params_prev, std::span<const TrainingExample> dataset,
                             const ReasoningDomain& domain, const TrainConfig& config, TrainTrace* trace = nullptr);

struct IterationReport {
    int iteration = 0;
    std::size_t dataset_size = 0;
    std::vector<double> epoch_losses;
    EvalResult eval;
    double wall_seconds = 0.0;
    GenerationStats generation;
};

/// True when `current` beats `previous` by more than one standard error.
bool accuracy_improved(double previous, double current, double current_stderr);

/// Draws problem indices without replacement across calls; once the pool is
/// exhausted it is reshuffled. A single draw never repeats an index.
class ProblemSampler {
public:
    ProblemSampler(std::size_t pool_size, std::uint64_t seed);
    std::vector<std::size_t> next(std::size_t count);

private:
    void reshuffle();

    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::size_t round_ = 0;
    std::uint64_t seed_;
};

/// What one iteration of an iterative method produced.
struct IterationOutput {
    PolicyParams params;
    std::size_t dataset_size = 0;
    std::vector<double> epoch_losses;
    GenerationStats generation;
};

/// Generates data from `params_prev` on the given problems and trains.
/// `iteration` is 1-based.
using IterationStep =
    std::function<IterationOutput(const PolicyParams& params_prev, std::span<const Problem> problems, int iteration)>;

struct LoopResult {
    EvalResult initial_eval;
    std::vector<PolicyParams> params;  ///< params[i] after iteration i + 1
    std::vector<IterationReport> reports;
    std::size_t best = 0;  ///< index into params of the most accurate iteration
    std::string stop_reason;
};

/// Shared generate-then-train scaffold: sample problems, run `step`, evaluate,
/// stop at max_iterations, on an empty dataset, or (with early_stop) once
/// accuracy stops improving by more than one standard error.
LoopResult run_iterative(const PolicyParams& initial, std::span<const Problem> pool,
                         std::span<const Problem> eval_problems, const ReasoningDomain& domain,
                         const TrainConfig& train, const EvalConfig& eval, int threads, const IterationStep& step);

/// The self-training loop: MCTS scored data from the previous policy, then
/// weighted NLL + KL training anchored to it.
LoopResult run_self_training(const PolicyParams& initial, std::span<const Problem> pool,
                             std::span<const Problem> eval_problems, const ReasoningDomain& domain,
                             const SearchConfig& search, const ScoringConfig& scoring, const TrainConfig& train,
                             const EvalConfig& eval, int threads = 1);

}  // namespace stepmcts
