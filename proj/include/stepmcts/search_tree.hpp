#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stepmcts/policy.hpp"
#include "stepmcts/rng.hpp"
#include "stepmcts/toy_domain.hpp"

namespace stepmcts {

struct SearchConfig {
    int num_simulations = 32;
    double ucb_c = 1.414;
    int max_children = 5;
    int max_expansion_attempts = 16;
    double sample_temperature = 1.0;
    int rollout_depth_cap = 16;
    std::uint64_t rng_seed = 0;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

using NodeId = std::size_t;

struct MctsNode {
    std::string step;  ///< empty for the root
    int visit_count = 0;
    double cumulative_reward = 0.0;
    std::vector<NodeId> children;
    bool is_terminal = false;
    int expansion_attempts = 0;
    std::optional<NodeId> parent;

    double mean_reward() const { return visit_count > 0 ? cumulative_reward / visit_count : 0.0; }
};

/// Arena-allocated search tree rooted at a partial solution. Node 0 is the root.
class SearchTree {
public:
    SearchTree(Problem problem, Partial root_partial, bool root_terminal);

    static constexpr NodeId root() { return 0; }

    const MctsNode& node(NodeId id) const { return nodes_.at(id); }
    MctsNode& node(NodeId id) { return nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    const Problem& problem() const { return problem_; }
    const Partial& root_partial() const { return root_partial_; }

    NodeId add_child(NodeId parent, std::string step, bool terminal);

    /// Root partial followed by the steps from the root down to `id`.
    Partial partial_at(NodeId id) const;

    bool fully_expanded(NodeId id, const SearchConfig& config) const;

private:
    Problem problem_;
    Partial root_partial_;
    std::vector<MctsNode> nodes_;
};

/// UCB1: Q/N + c * sqrt(ln(parent_visits) / N). Unvisited nodes return +inf.
/// Throws std::invalid_argument when parent_visits < 1.
double ucb_value(const MctsNode& node, int parent_visits, double c);

/// Child of `parent` with the highest UCB1; ties go to the earliest child.
/// Returns nullopt for a childless node.
std::optional<NodeId> best_ucb_child(const SearchTree& tree, NodeId parent, double c);

/// Descends by highest UCB until reaching a terminal node or one that is not
/// fully expanded.
std::vector<NodeId> select_path(const SearchTree& tree, const SearchConfig& config);

struct Expansion {
    NodeId node;   ///< new child, or the existing sibling the sample matched
    bool created;  ///< false when the sampled step duplicated a sibling
};

/// Samples one next step below `id`. A duplicate of an existing sibling adds
/// no child; the attempt still counts toward full expansion. Throws
/// std::logic_error on terminal or fully expanded nodes.
Expansion expand_node(SearchTree& tree, NodeId id, const PolicyParams& policy, const ReasoningDomain& domain,
                      const SearchConfig& config, Rng& rng);

/// Samples a continuation of `partial` until a final step or `depth_cap` new
/// steps; returns the verified reward, 0.0 on cap exhaustion. A partial that
/// already ends in a final step is verified directly.
double simulate_rollout(const Problem& problem, const Partial& partial, const PolicyParams& policy,
                        const ReasoningDomain& domain, double temperature, int depth_cap, Rng& rng);

void backpropagate(SearchTree& tree, std::span<const NodeId> path, double reward);

/// Exactly `config.num_simulations` rounds of select, expand, simulate and
/// backpropagate. Deterministic in `config.rng_seed`.
SearchTree run_search(const Problem& problem, const Partial& partial, const PolicyParams& policy,
                      const ReasoningDomain& domain, const SearchConfig& config);

/// One JSON object per node: {id, parent_id, step, n, q, terminal}.
void write_tree_jsonl(const SearchTree& tree, std::ostream& out);

}  // namespace stepmcts
