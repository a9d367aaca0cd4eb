#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stepmcts/search_tree.hpp"

namespace stepmcts {

struct ScoringConfig {
    double alpha = 1.0;
    int max_solution_steps = 12;
    double zero_epsilon = 1e-12;

    void validate() const;
};

/// Sibling statistics fed to the relative-correctness score.
struct ChildStats {
    double q = 0.0;
    int n = 0;
};

struct ScoredStep {
    std::string step;
    double score = 0.0;
    int visits = 0;
    double mean_reward = 0.0;
};

/// One (problem, partial, next step, score) training record.
struct TrainingExample {
    std::string problem;
    Partial partial;
    std::string step;
    double score = 0.0;

    bool operator==(const TrainingExample&) const = default;
};

/// score_k = alpha * N_k * (Q_k / N_k - sum(Q) / sum(N)).
/// Throws std::invalid_argument for an empty list or any N_k < 1.
std::vector<double> score_children(std::span<const ChildStats> stats, double alpha);

/// Scores the root's visited children. Unvisited children carry no evidence
/// and are left out of both the output and the pooled mean.
std::vector<ScoredStep> score_root_children(const SearchTree& tree, double alpha);

/// Records for every scored step with |score| > zero_epsilon.
std::vector<TrainingExample> collect_records(const Problem& problem, const Partial& partial,
                                             std::span<const ScoredStep> scored, double zero_epsilon = 1e-12);

struct Advance {
    std::optional<std::string> step;  ///< step appended to the partial, if any
    bool stop = false;
};

/// Picks the root child with the highest UCB (search-time c). Stops when that
/// child is a final step, when the root has no children, or when the partial
/// already holds max_solution_steps steps.
Advance advance_partial(const SearchTree& tree, const SearchConfig& search, const ScoringConfig& scoring);

/// Called once per root position with the finished tree.
using RootVisitor = std::function<void(const SearchTree&)>;

/// Runs search at every step along one problem's reasoning path, starting
/// from the empty partial and advancing until a stop signal. The tree at root
/// position j is seeded from derive_seed(search.rng_seed, "search", problem_index, j).
/// Returns the number of root positions searched.
std::size_t walk_reasoning_path(const Problem& problem, std::size_t problem_index, const PolicyParams& policy,
                                const ReasoningDomain& domain, const SearchConfig& search,
                                const ScoringConfig& scoring, const RootVisitor& visit);

struct GenerationStats {
    std::size_t problems = 0;
    std::size_t skipped_problems = 0;
    std::size_t root_positions = 0;
    std::size_t scored_steps = 0;
    std::size_t zero_filtered = 0;
    std::size_t records = 0;
};

/// Scored next-step records for every problem, concatenated by problem index
/// then position. Problems whose first search yields no children are skipped
/// with a warning. Throws std::invalid_argument for an empty problem list.
std::vector<TrainingExample> generate_dataset(std::span<const Problem> problems, const PolicyParams& policy,
                                              const ReasoningDomain& domain, const SearchConfig& search,
                                              const ScoringConfig& scoring, int threads = 1,
                                              GenerationStats* stats = nullptr);

}  // namespace stepmcts
