#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stepmcts/policy.hpp"
#include "stepmcts/toy_domain.hpp"

namespace stepmcts {

struct EvalConfig {
    int num_runs = 4;
    double temperature = 0.7;
    int depth_cap = 16;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Accuracy as mean +- standard error over repeated sampled runs.
struct EvalResult {
    double accuracy_mean = 0.0;
    double accuracy_stderr = 0.0;
    bool stderr_defined = false;  ///< false for a single run; stderr is then reported as 0
    int num_runs = 0;
    int num_problems = 0;
    Family family = Family::A;
    std::vector<double> run_accuracies;
};

/// mean and sample-std / sqrt(runs) of per-run accuracies.
EvalResult summarize_runs(std::span<const double> run_accuracies, int num_problems, Family family);

/// Decodes one solution by sampling until a final step or `depth_cap` steps.
/// Returns the verified reward (0.0 when the cap is hit).
double decode_solution(const PolicyParams& params, const Problem& problem, const ReasoningDomain& domain,
                       double temperature, int depth_cap, Rng& rng, Partial* steps = nullptr);

/// Problem i in run r decodes with derive_seed(config.seed, "eval", r, i), so
/// results do not depend on the thread count and every method sees the same
/// random stream. The reported family is that of the first problem.
EvalResult evaluate(const PolicyParams& params, std::span<const Problem> problems, const ReasoningDomain& domain,
                    const EvalConfig& config, int threads = 1);

}  // namespace stepmcts
