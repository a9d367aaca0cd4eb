#include "stepmcts/search_tree.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stepmcts {

void SearchConfig::validate() const {
    auto fail = [](const char* what) { throw std::invalid_argument(what); };
    if (num_simulations < 1) fail("search.num_simulations must be >= 1");
    if (!(ucb_c >= 0.0) || !std::isfinite(ucb_c)) fail("search.ucb_c must be a finite value >= 0");
    if (max_children < 1) fail("search.max_children must be >= 1");
    if (max_expansion_attempts < 1) fail("search.max_expansion_attempts must be >= 1");
    if (!(sample_temperature > 0.0) || !std::isfinite(sample_temperature))
        fail("search.sample_temperature must be > 0");
    if (rollout_depth_cap < 1) fail("search.rollout_depth_cap must be >= 1");
}

SearchTree::SearchTree(Problem problem, Partial root_partial, bool root_terminal)
    : problem_(std::move(problem)), root_partial_(std::move(root_partial)) {
    MctsNode root;
    if (!root_partial_.empty()) root.step = root_partial_.back();
    root.is_terminal = root_terminal;
    nodes_.push_back(std::move(root));
}

NodeId SearchTree::add_child(NodeId parent, std::string step, bool terminal) {
    if (nodes_.at(parent).is_terminal) throw std::logic_error("terminal nodes cannot have children");
    const NodeId id = nodes_.size();
    MctsNode child;
    child.step = std::move(step);
    child.is_terminal = terminal;
    child.parent = parent;
    nodes_.push_back(std::move(child));
    nodes_[parent].children.push_back(id);
    return id;
}

Partial SearchTree::partial_at(NodeId id) const {
    std::vector<NodeId> chain;
    for (std::optional<NodeId> cur = id; cur && *cur != root(); cur = nodes_.at(*cur).parent) chain.push_back(*cur);
    Partial out = root_partial_;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) out.push_back(nodes_[*it].step);
    return out;
}

bool SearchTree::fully_expanded(NodeId id, const SearchConfig& config) const {
    const auto& n = nodes_.at(id);
    return static_cast<int>(n.children.size()) >= config.max_children ||
           n.expansion_attempts >= config.max_expansion_attempts;
}

double ucb_value(const MctsNode& node, int parent_visits, double c) {
    if (parent_visits < 1) throw std::invalid_argument("ucb_value: parent_visits must be >= 1");
    if (node.visit_count == 0) return std::numeric_limits<double>::infinity();
    const double n = node.visit_count;
    return node.cumulative_reward / n + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / n);
}

std::optional<NodeId> best_ucb_child(const SearchTree& tree, NodeId parent, double c) {
    const auto& p = tree.node(parent);
    if (p.children.empty()) return std::nullopt;
    const int parent_visits = std::max(p.visit_count, 1);
    NodeId best = p.children.front();
    double best_value = -std::numeric_limits<double>::infinity();
    for (NodeId child : p.children) {
        const double v = ucb_value(tree.node(child), parent_visits, c);
        if (v > best_value) {
            best_value = v;
            best = child;
        }
    }
    return best;
}

std::vector<NodeId> select_path(const SearchTree& tree, const SearchConfig& config) {
    std::vector<NodeId> path{SearchTree::root()};
    for (;;) {
        const NodeId cur = path.back();
        if (tree.node(cur).is_terminal || !tree.fully_expanded(cur, config)) break;
        const auto next = best_ucb_child(tree, cur, config.ucb_c);
        if (!next) break;
        path.push_back(*next);
    }
    return path;
}

Expansion expand_node(SearchTree& tree, NodeId id, const PolicyParams& policy, const ReasoningDomain& domain,
                      const SearchConfig& config, Rng& rng) {
    if (tree.node(id).is_terminal) throw std::logic_error("expand_node: node is terminal");
    if (tree.fully_expanded(id, config)) throw std::logic_error("expand_node: node is fully expanded");

    const Partial partial = tree.partial_at(id);
    const auto ctx = make_context(domain, tree.problem().text, partial);
    const std::size_t k = sample_index(logits(policy, ctx), config.sample_temperature, rng);
    const std::string& step = ctx.candidates[k];

    auto& n = tree.node(id);
    ++n.expansion_attempts;
    for (NodeId child : n.children)
        if (tree.node(child).step == step) return {child, false};
    return {tree.add_child(id, step, ctx.is_final[k] != 0), true};
}

double simulate_rollout(const Problem& problem, const Partial& partial, const PolicyParams& policy,
                        const ReasoningDomain& domain, double temperature, int depth_cap, Rng& rng) {
    if (!partial.empty() && domain.is_final_step(partial.back())) return domain.verify_answer(problem, partial.back());
    Partial path = partial;
    for (int depth = 0; depth < depth_cap; ++depth) {
        const auto ctx = make_context(domain, problem.text, path);
        const std::size_t k = sample_index(logits(policy, ctx), temperature, rng);
        path.push_back(ctx.candidates[k]);
        if (ctx.is_final[k]) return domain.verify_answer(problem, path.back());
    }
    return 0.0;
}

void backpropagate(SearchTree& tree, std::span<const NodeId> path, double reward) {
    for (NodeId id : path) {
        auto& n = tree.node(id);
        n.visit_count += 1;
        n.cumulative_reward += reward;
    }
}

SearchTree run_search(const Problem& problem, const Partial& partial, const PolicyParams& policy,
                      const ReasoningDomain& domain, const SearchConfig& config) {
    config.validate();
    check_params(policy, domain.feature_dim());
    const bool root_terminal = !partial.empty() && domain.is_final_step(partial.back());
    SearchTree tree(problem, partial, root_terminal);
    Rng rng(config.rng_seed);

    for (int sim = 0; sim < config.num_simulations; ++sim) {
        auto path = select_path(tree, config);
        const NodeId leaf = path.back();
        if (!tree.node(leaf).is_terminal && !tree.fully_expanded(leaf, config)) {
            // A duplicate sample is routed through the sibling it matched.
            path.push_back(expand_node(tree, leaf, policy, domain, config, rng).node);
        }
        const double reward = simulate_rollout(problem, tree.partial_at(path.back()), policy, domain,
                                               config.sample_temperature, config.rollout_depth_cap, rng);
        backpropagate(tree, path, reward);
    }
    return tree;
}

void write_tree_jsonl(const SearchTree& tree, std::ostream& out) {
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& n = tree.node(id);
        nlohmann::ordered_json j;
        j["id"] = id;
        j["parent_id"] = n.parent ? nlohmann::ordered_json(*n.parent) : nlohmann::ordered_json(nullptr);
        j["step"] = n.step;
        j["n"] = n.visit_count;
        j["q"] = n.cumulative_reward;
        j["terminal"] = n.is_terminal;
        out << j.dump() << '\n';
    }
}

}  // namespace stepmcts
