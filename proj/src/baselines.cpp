#include "stepmcts/baselines.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "stepmcts/parallel.hpp"

namespace stepmcts {

namespace {

// -log sigmoid(m), stable for either sign.
double softplus_neg(double m) { return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double pair_margin(const PolicyParams& params, const PolicyParams& ref, const PreparedPair& p, double beta) {
    const auto lp = log_softmax(logits(params, p.context));
    const auto lr = log_softmax(logits(ref, p.context));
    return beta * ((lp[p.chosen] - lr[p.chosen]) - (lp[p.rejected] - lr[p.rejected]));
}

}  // namespace

std::string_view method_name(Method method) {
    switch (method) {
    case Method::ZeroShot: return "zero_shot";
    case Method::Rft: return "rft";
    case Method::StepDpo: return "step_dpo";
    case Method::Ours: return "ours";
    }
    return "";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::ZeroShot, Method::Rft, Method::StepDpo, Method::Ours})
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method '" + std::string(name) +
                                "' (expected zero_shot, rft, step_dpo or ours)");
}

void BaselineConfig::validate() const {
    if (rft_samples < 1) throw std::invalid_argument("baseline.rft_samples must be >= 1");
    if (!(rft_temperature > 0.0)) throw std::invalid_argument("baseline.rft_temperature must be > 0");
    if (!(dpo_beta > 0.0) || !std::isfinite(dpo_beta)) throw std::invalid_argument("baseline.dpo_beta must be > 0");
}

std::vector<TrainingExample> rft_generate(const PolicyParams& params, std::span<const Problem> problems,
                                          const ReasoningDomain& domain, int samples_per_problem,
                                          double temperature, int depth_cap, std::uint64_t seed, int threads) {
    if (samples_per_problem < 1) throw std::invalid_argument("rft_generate: samples_per_problem must be >= 1");
    check_params(params, domain.feature_dim());
    std::vector<std::vector<TrainingExample>> slots(problems.size());
    parallel_for(problems.size(), threads, [&](std::size_t i) {
        std::set<Partial> kept;
        for (int j = 0; j < samples_per_problem; ++j) {
            Rng rng(derive_seed(seed, "rft", i, static_cast<std::uint64_t>(j)));
            Partial steps;
            if (decode_solution(params, problems[i], domain, temperature, depth_cap, rng, &steps) != 1.0) continue;
            if (!kept.insert(steps).second) continue;
            for (std::size_t t = 0; t < steps.size(); ++t)
                slots[i].push_back({problems[i].text, Partial(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(t)),
                                    steps[t], 1.0});
        }
    });
    std::vector<TrainingExample> out;
    for (auto& s : slots)
        for (auto& r : s) out.push_back(std::move(r));
    return out;
}

std::vector<PreferencePair> stepdpo_pairs(const SearchTree& tree) {
    std::vector<NodeId> visited;
    for (NodeId c : tree.node(SearchTree::root()).children)
        if (tree.node(c).visit_count > 0) visited.push_back(c);
    if (visited.size() < 2) return {};

    auto mean = [&](NodeId id) { return tree.node(id).mean_reward(); };
    NodeId best = visited.front(), worst = visited.front();
    for (NodeId id : visited) {
        if (mean(id) > mean(best)) best = id;
        if (mean(id) < mean(worst)) worst = id;
    }
    int best_count = 0, worst_count = 0;
    for (NodeId id : visited) {
        best_count += mean(id) == mean(best);
        worst_count += mean(id) == mean(worst);
    }
    if (best_count != 1 || worst_count != 1 || !(mean(best) > mean(worst))) return {};
    return {{tree.problem().text, tree.root_partial(), tree.node(best).step, tree.node(worst).step}};
}

std::vector<PreparedPair> prepare_pairs(std::span<const PreferencePair> pairs, const ReasoningDomain& domain) {
    std::vector<PreparedPair> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        PreparedPair p;
        p.context = make_context(domain, pair.problem, pair.partial);
        p.chosen = p.context.index_of(pair.chosen);
        p.rejected = p.context.index_of(pair.rejected);
        if (p.chosen == p.context.size() || p.rejected == p.context.size())
            throw std::invalid_argument("preference pair references a step that is not a candidate for '" +
                                        pair.problem + "'");
        out.push_back(std::move(p));
    }
    return out;
}

double dpo_loss(const PolicyParams& params, const PolicyParams& params_ref, std::span<const PreparedPair> pairs,
                double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss: beta must be > 0");
    if (pairs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& p : pairs) total += softplus_neg(pair_margin(params, params_ref, p, beta));
    return total / static_cast<double>(pairs.size());
}

std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& params_ref,
                             std::span<const PreparedPair> pairs, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("dpo_grad: beta must be > 0");
    std::vector<double> g(params.weights.size(), 0.0);
    if (pairs.empty()) return g;
    const double inv = 1.0 / static_cast<double>(pairs.size());
    for (const auto& p : pairs) {
        // d/dm of -log sigmoid(m) is -sigmoid(-m); the softmax normalizers
        // cancel in the chosen-minus-rejected difference.
        const double m = pair_margin(params, params_ref, p, beta);
        const double scale = -sigmoid(-m) * beta * inv;
        const auto w = p.context.row(p.chosen);
        const auto l = p.context.row(p.rejected);
        for (std::size_t d = 0; d < g.size(); ++d) g[d] += scale * (w[d] - l[d]);
    }
    return g;
}

double dpo_loss(const PolicyParams& params, const PolicyParams& params_ref, std::span<const PreferencePair> pairs,
                const ReasoningDomain& domain, double beta) {
    check_params(params, domain.feature_dim());
    check_params(params_ref, domain.feature_dim());
    return dpo_loss(params, params_ref, prepare_pairs(pairs, domain), beta);
}

std::vector<double> dpo_grad(const PolicyParams& params, const PolicyParams& params_ref,
                             std::span<const PreferencePair> pairs, const ReasoningDomain& domain, double beta) {
    check_params(params, domain.feature_dim());
    check_params(params_ref, domain.feature_dim());
    return dpo_grad(params, params_ref, prepare_pairs(pairs, domain), beta);
}

namespace {

MethodRun from_loop(Method method, LoopResult loop) {
    MethodRun run;
    run.method = method;
    run.initial_eval = std::move(loop.initial_eval);
    for (auto& r : loop.reports) {
        run.iterations.push_back(r.iteration);
        run.evals.push_back(r.eval);
        run.dataset_sizes.push_back(r.dataset_size);
    }
    run.params = std::move(loop.params);
    run.best = loop.best;
    run.stop_reason = std::move(loop.stop_reason);
    return run;
}

LoopResult run_step_dpo(const PolicyParams& initial, std::span<const Problem> pool,
                        std::span<const Problem> eval_problems, const ReasoningDomain& domain,
                        const MethodSetup& setup) {
    auto step = [&](const PolicyParams& prev, std::span<const Problem> problems, int it) {
        SearchConfig s = setup.search;
        s.rng_seed = derive_seed(setup.search.rng_seed, "iteration", static_cast<std::uint64_t>(it));
        std::vector<std::vector<PreferencePair>> slots(problems.size());
        parallel_for(problems.size(), setup.threads, [&](std::size_t i) {
            walk_reasoning_path(problems[i], i, prev, domain, s, setup.scoring, [&](const SearchTree& tree) {
                for (auto& p : stepdpo_pairs(tree)) slots[i].push_back(std::move(p));
            });
        });
        std::vector<PreferencePair> pairs;
        for (auto& sl : slots)
            for (auto& p : sl) pairs.push_back(std::move(p));

        IterationOutput out;
        out.dataset_size = pairs.size();
        out.params = prev;
        if (pairs.empty()) return out;

        const auto prepared = prepare_pairs(pairs, domain);
        const double beta = setup.baseline.dpo_beta;
        auto subset = [&](std::span<const std::size_t> idx) {
            std::vector<PreparedPair> sel;
            sel.reserve(idx.size());
            for (std::size_t i : idx) sel.push_back(prepared[i]);
            return sel;
        };
        Objective objective;
        objective.size = prepared.size();
        objective.value = [&](const PolicyParams& p, std::span<const std::size_t> idx) {
            if (idx.size() == prepared.size()) return dpo_loss(p, prev, prepared, beta);
            return dpo_loss(p, prev, subset(idx), beta);
        };
        objective.gradient = [&](const PolicyParams& p, std::span<const std::size_t> idx) {
            return dpo_grad(p, prev, subset(idx), beta);
        };
        TrainConfig t = setup.train;
        t.rng_seed = derive_seed(setup.train.rng_seed, "train", static_cast<std::uint64_t>(it));
        TrainTrace trace;
        out.params = minimize(prev, objective, t, &trace);
        out.epoch_losses = std::move(trace.epoch_losses);
        return out;
    };
    return run_iterative(initial, pool, eval_problems, domain, setup.train, setup.eval, setup.threads, step);
}

}  // namespace

MethodRun run_method(Method method, const PolicyParams& initial, std::span<const Problem> pool,
                     std::span<const Problem> eval_problems, const ReasoningDomain& domain, const MethodSetup& setup) {
    setup.search.validate();
    setup.scoring.validate();
    setup.train.validate();
    setup.eval.validate();
    setup.baseline.validate();
    check_params(initial, domain.feature_dim());

    switch (method) {
    case Method::ZeroShot: {
        MethodRun run;
        run.method = method;
        run.initial_eval = evaluate(initial, eval_problems, domain, setup.eval, setup.threads);
        run.iterations.push_back(0);
        run.evals.push_back(run.initial_eval);
        run.params.push_back(initial);
        run.dataset_sizes.push_back(0);
        run.stop_reason = "untrained";
        return run;
    }
    case Method::Rft: {
        if (pool.size() < static_cast<std::size_t>(setup.train.problems_per_iteration))
            throw std::invalid_argument("problem pool is smaller than train.problems_per_iteration");
        MethodRun run;
        run.method = method;
        run.initial_eval = evaluate(initial, eval_problems, domain, setup.eval, setup.threads);
        ProblemSampler sampler(pool.size(), derive_seed(setup.train.rng_seed, "sampler"));
        std::vector<Problem> batch;
        for (std::size_t i : sampler.next(static_cast<std::size_t>(setup.train.problems_per_iteration)))
            batch.push_back(pool[i]);
        const auto dataset =
            rft_generate(initial, batch, domain, setup.baseline.rft_samples, setup.baseline.rft_temperature,
                         setup.search.rollout_depth_cap, derive_seed(setup.train.rng_seed, "rft"), setup.threads);
        PolicyParams trained = initial;
        if (!dataset.empty()) {
            TrainConfig t = setup.train;
            t.kl_weight = 0.0;
            t.rng_seed = derive_seed(setup.train.rng_seed, "train", 1);
            trained = train_iteration(initial, dataset, domain, t);
        }
        run.iterations.push_back(1);
        run.evals.push_back(evaluate(trained, eval_problems, domain, setup.eval, setup.threads));
        run.params.push_back(std::move(trained));
        run.dataset_sizes.push_back(dataset.size());
        run.stop_reason = dataset.empty() ? "empty_dataset" : "single_round";
        return run;
    }
    case Method::StepDpo:
        return from_loop(method, run_step_dpo(initial, pool, eval_problems, domain, setup));
    case Method::Ours:
        return from_loop(method, run_self_training(initial, pool, eval_problems, domain, setup.search, setup.scoring,
                                                   setup.train, setup.eval, setup.threads));
    }
    throw std::logic_error("unhandled method");
}

EvalResult transfer_eval(const PolicyParams& params, Family trained_on, std::span<const Problem> problems,
                         const ReasoningDomain& domain, const EvalConfig& eval, int threads) {
    for (const auto& p : problems)
        if (p.family == trained_on)
            throw std::invalid_argument("transfer_eval: evaluation problems come from the training family " +
                                        std::string(family_name(trained_on)));
    return evaluate(params, problems, domain, eval, threads);
}

}  // namespace stepmcts
