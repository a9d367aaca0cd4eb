#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "stepmcts/rng.hpp"
#include "stepmcts/search_tree.hpp"
#include "test_domains.hpp"

using namespace stepmcts;
using testing::ChainDomain;

namespace {

MctsNode stats(double q, int n) {
    MctsNode node;
    node.cumulative_reward = q;
    node.visit_count = n;
    return node;
}

const Problem kTwoPlusTwo{"2+2", 4, Family::A, 1};
const Problem kMixed{"2+3*4", 14, Family::A, 2};

void set_stats(SearchTree& tree, NodeId id, double q, int n) {
    tree.node(id).cumulative_reward = q;
    tree.node(id).visit_count = n;
}

}  // namespace

TEST_SUITE("search_tree") {

TEST_CASE("ucb values match the closed form") {
    CHECK(ucb_value(stats(1, 1), 4, 1.0) == doctest::Approx(2.1774).epsilon(1e-4));
    CHECK(ucb_value(stats(1, 3), 4, 1.0) == doctest::Approx(1.0130).epsilon(1e-4));
    // 2/3 + sqrt(ln 6 / 3) = 1.43949
    CHECK(ucb_value(stats(2, 3), 6, 1.0) == doctest::Approx(1.4395).epsilon(1e-4));
    CHECK(ucb_value(stats(0, 1), 6, 1.0) == doctest::Approx(1.3386).epsilon(1e-4));
    CHECK(ucb_value(stats(1, 2), 6, 1.0) == doctest::Approx(1.4466).epsilon(1e-4));
    CHECK(ucb_value(stats(1, 3), 4, 1.0) == doctest::Approx(oracle::ucb(1, 3, 4, 1.0)).epsilon(1e-14));
}

TEST_CASE("unvisited nodes are infinitely urgent") {
    CHECK(std::isinf(ucb_value(stats(0, 0), 1, 1.0)));
    CHECK(std::isinf(ucb_value(stats(0, 0), 100, 0.0)));
    CHECK_THROWS_AS(ucb_value(stats(1, 1), 0, 1.0), std::invalid_argument);
}

TEST_CASE("best_ucb_child picks the highest bound") {
    SearchTree tree(kMixed, {}, false);
    const auto a = tree.add_child(0, "a", false);
    const auto b = tree.add_child(0, "b", false);
    const auto c = tree.add_child(0, "c", false);
    set_stats(tree, 0, 3, 6);
    set_stats(tree, a, 2, 3);
    set_stats(tree, b, 0, 1);
    set_stats(tree, c, 1, 2);
    CHECK(best_ucb_child(tree, 0, 1.0) == c);

    SearchTree empty(kMixed, {}, false);
    CHECK_FALSE(best_ucb_child(empty, 0, 1.0).has_value());
}

TEST_CASE("ties go to the earliest child") {
    SearchTree tree(kMixed, {}, false);
    const auto a = tree.add_child(0, "a", false);
    const auto b = tree.add_child(0, "b", false);
    set_stats(tree, 0, 2, 2);
    set_stats(tree, a, 1, 1);
    set_stats(tree, b, 1, 1);
    CHECK(best_ucb_child(tree, 0, 1.0) == a);
}

TEST_CASE("select_path descends into the higher bound") {
    SearchConfig cfg;
    cfg.ucb_c = 1.0;
    cfg.max_children = 2;
    SearchTree tree(kMixed, {}, false);
    const auto a = tree.add_child(0, "a", false);
    const auto b = tree.add_child(0, "b", false);
    set_stats(tree, 0, 2, 4);
    set_stats(tree, a, 1, 1);
    set_stats(tree, b, 1, 3);
    const auto path = select_path(tree, cfg);
    REQUIRE(path.size() == 2);
    CHECK(path[0] == 0);
    CHECK(path[1] == a);
}

TEST_CASE("select_path stops at an unexpanded or terminal root") {
    SearchConfig cfg;
    SearchTree open(kMixed, {}, false);
    CHECK(select_path(open, cfg) == std::vector<NodeId>{0});
    SearchTree done(kMixed, {"The final answer is 14."}, true);
    CHECK(select_path(done, cfg) == std::vector<NodeId>{0});
}

TEST_CASE("expansion with a single candidate counts every attempt") {
    ChainDomain domain({"2+2 = 4", "The final answer is 4."});
    SearchConfig cfg;
    SearchTree tree(kTwoPlusTwo, {}, false);
    const auto policy = PolicyParams::zeros(1);
    Rng rng(7);

    const auto first = expand_node(tree, 0, policy, domain, cfg, rng);
    CHECK(first.created);
    CHECK(tree.node(0).children.size() == 1);
    CHECK(tree.node(first.node).step == "2+2 = 4");

    const auto again = expand_node(tree, 0, policy, domain, cfg, rng);
    CHECK_FALSE(again.created);
    CHECK(again.node == first.node);
    CHECK(tree.node(0).children.size() == 1);
    CHECK(tree.node(0).expansion_attempts == 2);

    while (!tree.fully_expanded(0, cfg)) expand_node(tree, 0, policy, domain, cfg, rng);
    CHECK(tree.node(0).expansion_attempts == cfg.max_expansion_attempts);
    CHECK(tree.node(0).children.size() == 1);
}

TEST_CASE("expanding a full or terminal node is an error") {
    ChainDomain domain({"2+2 = 4", "The final answer is 4."});
    SearchConfig cfg;
    cfg.max_children = 1;
    SearchTree tree(kTwoPlusTwo, {}, false);
    Rng rng(1);
    expand_node(tree, 0, PolicyParams::zeros(1), domain, cfg, rng);
    CHECK(tree.fully_expanded(0, cfg));
    CHECK_THROWS_AS(expand_node(tree, 0, PolicyParams::zeros(1), domain, cfg, rng), std::logic_error);

    SearchTree done(kTwoPlusTwo, {"2+2 = 4", "The final answer is 4."}, true);
    CHECK_THROWS_AS(expand_node(done, 0, PolicyParams::zeros(1), domain, cfg, rng), std::logic_error);
}

TEST_CASE("rollouts return the verified reward") {
    Rng rng(3);
    const auto policy = PolicyParams::zeros(1);
    ChainDomain right({"2+2 = 4", "The final answer is 4."});
    CHECK(simulate_rollout(kTwoPlusTwo, {}, policy, right, 1.0, 16, rng) == 1.0);
    ChainDomain wrong({"2+2 = 5", "The final answer is 5."});
    CHECK(simulate_rollout(kTwoPlusTwo, {}, policy, wrong, 1.0, 16, rng) == 0.0);
    ChainDomain forever({"2+2 = 4"}, true);
    CHECK(simulate_rollout(kTwoPlusTwo, {}, policy, forever, 1.0, 5, rng) == 0.0);
    // A partial that already ended is verified as is.
    CHECK(simulate_rollout(kTwoPlusTwo, {"2+2 = 4", "The final answer is 4."}, policy, right, 1.0, 16, rng) == 1.0);
}

TEST_CASE("backpropagate adds to every node on the path") {
    SearchTree tree(kMixed, {}, false);
    const auto a = tree.add_child(0, "a", false);
    const auto b = tree.add_child(a, "b", false);
    const std::vector<NodeId> path{0, a, b};
    backpropagate(tree, path, 1.0);
    for (NodeId id : path) {
        CHECK(tree.node(id).visit_count == 1);
        CHECK(tree.node(id).cumulative_reward == 1.0);
    }
    const std::vector<NodeId> root{0};
    backpropagate(tree, root, 0.0);
    CHECK(tree.node(0).visit_count == 2);
    CHECK(tree.node(0).cumulative_reward == 1.0);
}

TEST_CASE("run_search on a single correct chain") {
    ChainDomain domain({"2+2 = 4", "The final answer is 4."});
    SearchConfig cfg;
    cfg.num_simulations = 8;
    const auto tree = run_search(kTwoPlusTwo, {}, PolicyParams::zeros(1), domain, cfg);
    CHECK(tree.node(0).visit_count == 8);
    CHECK(tree.node(0).cumulative_reward == 8.0);
}

TEST_CASE("run_search at a terminal root never expands") {
    ArithmeticDomain domain;
    SearchConfig cfg;
    cfg.num_simulations = 8;
    const Partial done{"3*4 = 12", "2+12 = 14", "The final answer is 14."};
    const auto tree = run_search(kMixed, done, PolicyParams::zeros(domain.feature_dim()), domain, cfg);
    CHECK(tree.node(0).visit_count == 8);
    CHECK(tree.node(0).cumulative_reward == 8.0);
    CHECK(tree.node(0).children.empty());
    CHECK(tree.size() == 1);
}

TEST_CASE("run_search is deterministic in its seed") {
    ArithmeticDomain domain;
    SearchConfig cfg;
    cfg.rng_seed = 99;
    const Problem p{"3*4+5*6+7", 49, Family::A, 3};
    const auto policy = PolicyParams::zeros(domain.feature_dim());
    std::ostringstream a, b;
    write_tree_jsonl(run_search(p, {}, policy, domain, cfg), a);
    write_tree_jsonl(run_search(p, {}, policy, domain, cfg), b);
    CHECK(a.str() == b.str());
    cfg.rng_seed = 100;
    std::ostringstream c;
    write_tree_jsonl(run_search(p, {}, policy, domain, cfg), c);
    CHECK(a.str() != c.str());
}

TEST_CASE("visit accounting holds over random searches") {
    ArithmeticDomain domain;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        Rng rng(derive_seed(5, "trial", trial));
        const Family family = trial % 2 ? Family::B : Family::A;
        const Problem p = generate_problem(family, static_cast<int>(rng.range(2, 5)), rng);
        SearchConfig cfg;
        cfg.num_simulations = static_cast<int>(rng.range(1, 40));
        cfg.rng_seed = trial;
        PolicyParams policy = PolicyParams::zeros(domain.feature_dim());
        for (double& w : policy.weights) w = rng.uniform() * 4 - 2;
        const auto tree = run_search(p, {}, policy, domain, cfg);
        CHECK(tree.node(0).visit_count == cfg.num_simulations);
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(id);
            CHECK(node.cumulative_reward >= 0.0);
            CHECK(node.cumulative_reward <= node.visit_count);
            CHECK(static_cast<int>(node.children.size()) <= cfg.max_children);
            if (!node.is_terminal && !node.children.empty()) {
                // Below the root, the creating rollout and duplicate samples
                // routed to a node visit it without visiting a child.
                int sum = 0;
                for (NodeId c : node.children) sum += tree.node(c).visit_count;
                if (id == 0)
                    CHECK(sum == node.visit_count);
                else
                    CHECK(sum <= node.visit_count - 1);
            }
        }
    }
}

TEST_CASE("tree dump has one object per node") {
    SearchTree tree(kMixed, {}, false);
    tree.add_child(0, "3*4 = 12", false);
    std::ostringstream out;
    write_tree_jsonl(tree, out);
    CHECK(out.str() ==
          "{\"id\":0,\"parent_id\":null,\"step\":\"\",\"n\":0,\"q\":0.0,\"terminal\":false}\n"
          "{\"id\":1,\"parent_id\":0,\"step\":\"3*4 = 12\",\"n\":0,\"q\":0.0,\"terminal\":false}\n");
}

TEST_CASE("search config validation") {
    SearchConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.sample_temperature = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SearchConfig{};
    cfg.num_simulations = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

}
