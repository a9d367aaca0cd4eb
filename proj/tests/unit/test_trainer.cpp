#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "stepmcts/rng.hpp"
#include "stepmcts/trainer.hpp"
#include "test_domains.hpp"

using namespace stepmcts;
using testing::TableDomain;

namespace {

/// `problems` single-decision problems with `k` final candidates each and
/// random features; candidate 0 is correct.
TableDomain random_table(std::size_t problems, std::size_t k, std::size_t dim, Rng& rng) {
    TableDomain domain(dim);
    for (std::size_t p = 0; p < problems; ++p) {
        std::vector<StepOption> opts;
        for (std::size_t i = 0; i < k; ++i) {
            std::vector<double> f(dim);
            for (double& v : f) v = rng.uniform() * 2 - 1;
            opts.push_back({final_step_text(static_cast<std::int64_t>(i)), f, true});
        }
        domain.set("p" + std::to_string(p), opts);
    }
    return domain;
}

std::vector<TrainingExample> random_records(std::size_t problems, std::size_t k, std::size_t count, Rng& rng) {
    std::vector<TrainingExample> out;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back({"p" + std::to_string(rng.below(problems)), {},
                       final_step_text(static_cast<std::int64_t>(rng.below(k))), rng.uniform() * 2 - 1});
    return out;
}

PolicyParams random_params(std::size_t dim, Rng& rng) {
    PolicyParams p = PolicyParams::zeros(dim);
    for (double& w : p.weights) w = rng.uniform() * 2 - 1;
    return p;
}

double step_prob(const PolicyParams& params, const TrainingExample& r, const ReasoningDomain& domain) {
    const auto lp = step_logprobs(params, r.problem, r.partial, domain);
    for (std::size_t i = 0; i < lp.candidates.size(); ++i)
        if (lp.candidates[i] == r.step) return std::exp(lp.logprobs[i]);
    throw std::logic_error("step not found");
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("uniform single-record loss") {
    Rng rng(1);
    const auto domain = random_table(1, 4, 3, rng);
    const auto zero = PolicyParams::zeros(3);
    const std::vector<TrainingExample> pos{{"p0", {}, final_step_text(2), 0.5}};
    const std::vector<TrainingExample> neg{{"p0", {}, final_step_text(2), -0.5}};
    CHECK(loss(zero, zero, pos, domain, 0.0) == doctest::Approx(0.6931).epsilon(1e-4));
    CHECK(loss(zero, zero, pos, domain, 0.0) == doctest::Approx(0.5 * std::log(4.0)).epsilon(1e-12));
    CHECK(loss(zero, zero, neg, domain, 0.0) == doctest::Approx(-0.6931).epsilon(1e-4));
}

TEST_CASE("KL term is zero at the reference and positive away from it") {
    Rng rng(2);
    const auto domain = random_table(3, 4, 3, rng);
    const auto records = random_records(3, 4, 10, rng);
    const auto p = random_params(3, rng);
    const auto q = random_params(3, rng);
    CHECK(loss(p, p, records, domain, 5.0) == doctest::Approx(loss(p, p, records, domain, 0.0)).epsilon(1e-12));
    CHECK(loss(p, q, records, domain, 1.0) > loss(p, q, records, domain, 0.0));
}

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(3);
    for (int t = 0; t < 100; ++t) {
        const auto domain = random_table(4, 2 + rng.below(4), 5, rng);
        std::vector<TrainingExample> records;
        for (std::size_t i = 0; i < 6; ++i) {
            const auto p = "p" + std::to_string(rng.below(4));
            const auto opts = domain.step_options(p, {});
            records.push_back({p, {}, opts[rng.below(opts.size())].text, rng.uniform() * 2 - 1});
        }
        const auto w = random_params(5, rng);
        const auto ref = random_params(5, rng);
        const double kl = rng.uniform() * 2;
        const auto g = grad(w, ref, records, domain, kl);
        const auto num = oracle::numeric_gradient(
            [&](const std::vector<double>& v) { return loss(PolicyParams{v}, ref, records, domain, kl); }, w.weights);
        CHECK(oracle::relative_error(g, num) < 1e-4);
    }
}

TEST_CASE("one step moves probability with the sign of the score") {
    Rng rng(4);
    for (int t = 0; t < 100; ++t) {
        const auto domain = random_table(1, 4, 4, rng);
        const auto w = random_params(4, rng);
        const TrainingExample r{"p0", {}, final_step_text(static_cast<std::int64_t>(rng.below(4))), 0.0};
        for (double score : {0.7, -0.7}) {
            TrainingExample rec = r;
            rec.score = score;
            const std::vector<TrainingExample> batch{rec};
            const auto g = grad(w, w, batch, domain, 0.0);
            PolicyParams next = w;
            for (std::size_t d = 0; d < g.size(); ++d) next.weights[d] -= 0.05 * g[d];
            if (score > 0)
                CHECK(step_prob(next, rec, domain) > step_prob(w, rec, domain));
            else
                CHECK(step_prob(next, rec, domain) < step_prob(w, rec, domain));
        }
    }
}

TEST_CASE("training on one positive record concentrates the policy") {
    Rng rng(5);
    const auto domain = random_table(1, 4, 4, rng);
    const std::vector<TrainingExample> data{{"p0", {}, final_step_text(1), 1.0}};
    TrainConfig cfg;
    cfg.kl_weight = 0.0;
    cfg.epochs = 200;
    cfg.learning_rate = 1.0;
    const auto trained = train_iteration(PolicyParams::zeros(4), data, domain, cfg);
    CHECK(step_prob(trained, data[0], domain) > 0.9);
}

TEST_CASE("a dominant KL weight keeps the previous policy") {
    Rng rng(6);
    const auto domain = random_table(3, 4, 4, rng);
    const auto records = random_records(3, 4, 12, rng);
    const auto prev = random_params(4, rng);
    TrainConfig cfg;
    cfg.kl_weight = 1e6;
    TrainTrace trace;
    const auto next = train_iteration(prev, records, domain, cfg, &trace);
    double max_delta = 0;
    for (std::size_t d = 0; d < prev.weights.size(); ++d)
        max_delta = std::max(max_delta, std::abs(next.weights[d] - prev.weights[d]));
    CHECK(max_delta < 1e-3);
}

TEST_CASE("epoch losses never increase") {
    Rng rng(7);
    const auto domain = random_table(5, 4, 4, rng);
    const auto records = random_records(5, 4, 40, rng);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 8;
    cfg.learning_rate = 5.0;
    TrainTrace trace;
    train_iteration(PolicyParams::zeros(4), records, domain, cfg, &trace);
    REQUIRE(trace.epoch_losses.size() == 10);
    double prev = trace.initial_loss;
    for (double l : trace.epoch_losses) {
        CHECK(l <= prev);
        prev = l;
    }
}

TEST_CASE("training is deterministic and rejects bad input") {
    Rng rng(8);
    const auto domain = random_table(3, 4, 4, rng);
    const auto records = random_records(3, 4, 20, rng);
    TrainConfig cfg;
    cfg.rng_seed = 3;
    CHECK(train_iteration(PolicyParams::zeros(4), records, domain, cfg) ==
          train_iteration(PolicyParams::zeros(4), records, domain, cfg));
    CHECK_THROWS_AS(train_iteration(PolicyParams::zeros(4), {}, domain, cfg), std::invalid_argument);
    const std::vector<TrainingExample> bad{{"p0", {}, "not a candidate", 1.0}};
    CHECK_THROWS_AS(train_iteration(PolicyParams::zeros(4), bad, domain, cfg), std::invalid_argument);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("improvement needs more than one standard error") {
    CHECK(accuracy_improved(0.50, 0.70, 0.01));
    CHECK_FALSE(accuracy_improved(0.70, 0.70, 0.01));
    CHECK_FALSE(accuracy_improved(0.70, 0.705, 0.01));
    CHECK(accuracy_improved(0.70, 0.72, 0.01));
}

TEST_CASE("the sampler draws without replacement until the pool runs out") {
    ProblemSampler s(10, 1);
    std::vector<int> seen(10, 0);
    for (std::size_t i : s.next(4)) ++seen[i];
    for (std::size_t i : s.next(6)) ++seen[i];
    for (int c : seen) CHECK(c == 1);
    const auto wrap = s.next(7);
    std::set<std::size_t> unique(wrap.begin(), wrap.end());
    CHECK(unique.size() == wrap.size());
}

TEST_CASE("the loop stops when accuracy stalls and keeps the best iteration") {
    // Problem i has a correct answer with logit w0 and a wrong one with logit
    // w1 * (i + 1). Under greedy decoding the accuracy is the fraction of
    // problems with w1 * (i + 1) <= w0, so each iteration's accuracy is set
    // exactly by the weights it returns.
    TableDomain domain(2);
    std::vector<Problem> problems;
    for (int i = 0; i < 10; ++i) {
        const std::string text = "p" + std::to_string(i);
        domain.set(text, {{final_step_text(1), {1.0, 0.0}, true}, {final_step_text(0), {0.0, i + 1.0}, true}});
        problems.push_back({text, 1, Family::A, 2});
    }
    const std::vector<PolicyParams> schedule{{{1.0, 1 / 5.5}}, {{1.0, 1 / 7.5}}, {{1.0, 1 / 7.5}}};
    TrainConfig train;
    train.problems_per_iteration = 5;
    train.max_iterations = 5;
    EvalConfig eval;
    eval.temperature = 1e-9;
    eval.num_runs = 2;
    int calls = 0;
    const auto result =
        run_iterative(PolicyParams{{1.0, 1.0}}, problems, problems, domain, train, eval, 1,
                      [&](const PolicyParams&, std::span<const Problem> batch, int iteration) {
                          CHECK(batch.size() == 5);
                          CHECK(iteration == calls + 1);
                          return IterationOutput{schedule.at(static_cast<std::size_t>(calls++)), 1, {}, {}};
                      });
    CHECK(result.initial_eval.accuracy_mean == doctest::Approx(0.1));
    REQUIRE(result.reports.size() == 3);
    CHECK(result.reports[0].eval.accuracy_mean == doctest::Approx(0.5));
    CHECK(result.reports[1].eval.accuracy_mean == doctest::Approx(0.7));
    CHECK(result.reports[2].eval.accuracy_mean == doctest::Approx(0.7));
    CHECK(result.stop_reason == "converged");
    CHECK(result.best == 1);
    CHECK(result.params[result.best] == schedule[1]);
}

}
