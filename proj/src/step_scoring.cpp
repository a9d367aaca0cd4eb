#include "stepmcts/step_scoring.hpp"

#include <cmath>
#include <stdexcept>

#include "stepmcts/log.hpp"
#include "stepmcts/parallel.hpp"

namespace stepmcts {

void ScoringConfig::validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("scoring.alpha must be > 0");
    if (max_solution_steps < 1) throw std::invalid_argument("scoring.max_solution_steps must be >= 1");
    if (!(zero_epsilon >= 0.0)) throw std::invalid_argument("scoring.zero_epsilon must be >= 0");
}

std::vector<double> score_children(std::span<const ChildStats> stats, double alpha) {
    if (stats.empty()) throw std::invalid_argument("score_children: no children");
    double q_sum = 0.0;
    long long n_sum = 0;
    for (const auto& s : stats) {
        if (s.n < 1) throw std::invalid_argument("score_children: child with zero visits");
        q_sum += s.q;
        n_sum += s.n;
    }
    const double pooled = q_sum / static_cast<double>(n_sum);
    std::vector<double> out;
    out.reserve(stats.size());
    for (const auto& s : stats) out.push_back(alpha * s.n * (s.q / s.n - pooled));
    return out;
}

std::vector<ScoredStep> score_root_children(const SearchTree& tree, double alpha) {
    std::vector<ChildStats> stats;
    std::vector<NodeId> ids;
    for (NodeId c : tree.node(SearchTree::root()).children) {
        const auto& n = tree.node(c);
        if (n.visit_count < 1) continue;
        stats.push_back({n.cumulative_reward, n.visit_count});
        ids.push_back(c);
    }
    if (stats.empty()) return {};
    const auto scores = score_children(stats, alpha);
    std::vector<ScoredStep> out;
    out.reserve(ids.size());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        const auto& n = tree.node(ids[k]);
        out.push_back({n.step, scores[k], n.visit_count, n.mean_reward()});
    }
    return out;
}

std::vector<TrainingExample> collect_records(const Problem& problem, const Partial& partial,
                                             std::span<const ScoredStep> scored, double zero_epsilon) {
    std::vector<TrainingExample> out;
    for (const auto& s : scored) {
        if (std::abs(s.score) <= zero_epsilon) continue;
        out.push_back({problem.text, partial, s.step, s.score});
    }
    return out;
}

Advance advance_partial(const SearchTree& tree, const SearchConfig& search, const ScoringConfig& scoring) {
    if (static_cast<int>(tree.root_partial().size()) >= scoring.max_solution_steps) return {std::nullopt, true};
    const auto best = best_ucb_child(tree, SearchTree::root(), search.ucb_c);
    if (!best) return {std::nullopt, true};
    const auto& child = tree.node(*best);
    const bool at_limit = static_cast<int>(tree.root_partial().size()) + 1 >= scoring.max_solution_steps;
    return {child.step, child.is_terminal || at_limit};
}

std::size_t walk_reasoning_path(const Problem& problem, std::size_t problem_index, const PolicyParams& policy,
                                const ReasoningDomain& domain, const SearchConfig& search,
                                const ScoringConfig& scoring, const RootVisitor& visit) {
    Partial partial;
    std::size_t positions = 0;
    while (static_cast<int>(partial.size()) < scoring.max_solution_steps) {
        SearchConfig cfg = search;
        cfg.rng_seed = derive_seed(search.rng_seed, "search", problem_index, positions);
        const SearchTree tree = run_search(problem, partial, policy, domain, cfg);
        ++positions;
        visit(tree);
        const Advance next = advance_partial(tree, search, scoring);
        if (next.step) partial.push_back(*next.step);
        if (next.stop) break;
    }
    return positions;
}

std::vector<TrainingExample> generate_dataset(std::span<const Problem> problems, const PolicyParams& policy,
                                              const ReasoningDomain& domain, const SearchConfig& search,
                                              const ScoringConfig& scoring, int threads, GenerationStats* stats) {
    if (problems.empty()) throw std::invalid_argument("generate_dataset: no problems");
    search.validate();
    scoring.validate();

    struct Slot {
        std::vector<TrainingExample> records;
        GenerationStats stats;
    };
    std::vector<Slot> slots(problems.size());

    parallel_for(problems.size(), threads, [&](std::size_t i) {
        Slot& slot = slots[i];
        bool skipped = false;
        slot.stats.root_positions = walk_reasoning_path(
            problems[i], i, policy, domain, search, scoring, [&](const SearchTree& tree) {
                const auto& root = tree.node(SearchTree::root());
                if (tree.root_partial().empty() && root.children.empty()) {
                    skipped = true;
                    return;
                }
                const auto scored = score_root_children(tree, scoring.alpha);
                auto records = collect_records(tree.problem(), tree.root_partial(), scored, scoring.zero_epsilon);
                slot.stats.scored_steps += scored.size();
                slot.stats.zero_filtered += scored.size() - records.size();
                for (auto& r : records) slot.records.push_back(std::move(r));
            });
        if (skipped) {
            log_warning("skipping problem " + std::to_string(i) + " ('" + problems[i].text +
                        "'): first search produced no children");
            slot.records.clear();
            slot.stats = GenerationStats{};
            slot.stats.skipped_problems = 1;
        }
    });

    std::vector<TrainingExample> out;
    GenerationStats total;
    total.problems = problems.size();
    for (auto& slot : slots) {
        total.skipped_problems += slot.stats.skipped_problems;
        total.root_positions += slot.stats.root_positions;
        total.scored_steps += slot.stats.scored_steps;
        total.zero_filtered += slot.stats.zero_filtered;
        for (auto& r : slot.records) out.push_back(std::move(r));
    }
    total.records = out.size();
    if (stats) *stats = total;
    return out;
}

}  // namespace stepmcts
