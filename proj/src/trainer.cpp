#include "stepmcts/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "stepmcts/log.hpp"

namespace stepmcts {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("train.learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
    if (!(kl_weight >= 0.0) || !std::isfinite(kl_weight)) throw std::invalid_argument("train.kl_weight must be >= 0");
    if (problems_per_iteration < 1) throw std::invalid_argument("train.problems_per_iteration must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("train.max_iterations must be >= 1");
}

std::vector<PreparedRecord> prepare_records(std::span<const TrainingExample> records, const ReasoningDomain& domain) {
    std::vector<PreparedRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        PreparedRecord p;
        p.context = make_context(domain, r.problem, r.partial);
        p.chosen = p.context.index_of(r.step);
        if (p.chosen == p.context.size())
            throw std::invalid_argument("record step '" + r.step + "' is not a candidate for problem '" + r.problem + "'");
        p.score = r.score;
        out.push_back(std::move(p));
    }
    return out;
}

namespace {

double record_loss(const PolicyParams& params, const PolicyParams& params_prev, const PreparedRecord& r,
                   double kl_weight) {
    const auto lp = log_softmax(logits(params, r.context));
    double term = -r.score * lp[r.chosen];
    if (kl_weight != 0.0) {
        const auto lq = log_softmax(logits(params_prev, r.context));
        double kl = 0.0;
        for (std::size_t k = 0; k < lp.size(); ++k) kl += std::exp(lp[k]) * (lp[k] - lq[k]);
        term += kl_weight * kl;
    }
    return term;
}

void add_record_grad(const PolicyParams& params, const PolicyParams& params_prev, const PreparedRecord& r,
                     double kl_weight, double scale, std::span<double> g) {
    const auto lp = log_softmax(logits(params, r.context));
    std::vector<double> p(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) p[k] = std::exp(lp[k]);
    add_logprob_gradient(r.context, p, r.chosen, -r.score * scale, g);
    if (kl_weight != 0.0) {
        const auto lq = log_softmax(logits(params_prev, r.context));
        add_kl_gradient(r.context, lp, lq, kl_weight * scale, g);
    }
}

}  // namespace

double weighted_nll_kl_loss(const PolicyParams& params, const PolicyParams& params_prev,
                            std::span<const PreparedRecord> records, double kl_weight) {
    if (records.empty()) return 0.0;
    double total = 0.0;
    for (const auto& r : records) total += record_loss(params, params_prev, r, kl_weight);
    return total / static_cast<double>(records.size());
}

std::vector<double> weighted_nll_kl_grad(const PolicyParams& params, const PolicyParams& params_prev,
                                         std::span<const PreparedRecord> records, double kl_weight) {
    std::vector<double> g(params.weights.size(), 0.0);
    if (records.empty()) return g;
    const double inv = 1.0 / static_cast<double>(records.size());
    for (const auto& r : records) add_record_grad(params, params_prev, r, kl_weight, inv, g);
    return g;
}

double loss(const PolicyParams& params, const PolicyParams& params_prev, std::span<const TrainingExample> batch,
            const ReasoningDomain& domain, double kl_weight) {
    check_params(params, domain.feature_dim());
    check_params(params_prev, domain.feature_dim());
    return weighted_nll_kl_loss(params, params_prev, prepare_records(batch, domain), kl_weight);
}

std::vector<double> grad(const PolicyParams& params, const PolicyParams& params_prev,
                         std::span<const TrainingExample> batch, const ReasoningDomain& domain, double kl_weight) {
    check_params(params, domain.feature_dim());
    check_params(params_prev, domain.feature_dim());
    return weighted_nll_kl_grad(params, params_prev, prepare_records(batch, domain), kl_weight);
}

PolicyParams minimize(const PolicyParams& start, const Objective& objective, const TrainConfig& config,
                      TrainTrace* trace) {
    config.validate();
    std::vector<std::size_t> all(objective.size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> order = all;

    PolicyParams params = start;
    double lr = config.learning_rate;
    double current = objective.value(params, all);
    TrainTrace t;
    t.initial_loss = current;
    Rng rng(derive_seed(config.rng_seed, "minibatch"));
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        PolicyParams candidate = params;
        for (std::size_t begin = 0; begin < order.size(); begin += bs) {
            const std::size_t end = std::min(order.size(), begin + bs);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);
            const auto g = objective.gradient(candidate, batch);
            for (std::size_t d = 0; d < g.size(); ++d) candidate.weights[d] -= lr * g[d];
        }
        bool finite = true;
        for (double w : candidate.weights) finite = finite && std::isfinite(w);
        const double value = finite ? objective.value(candidate, all) : NAN;
        if (std::isfinite(value) && value <= current) {
            params = std::move(candidate);
            current = value;
        } else {
            lr *= 0.5;
            ++t.rejected_epochs;
        }
        t.epoch_losses.push_back(current);
    }
    t.final_learning_rate = lr;
    if (trace) *trace = std::move(t);
    return params;
}

PolicyParams train_iteration(const PolicyParams& params_prev, std::span<const TrainingExample> dataset,
                             const ReasoningDomain& domain, const TrainConfig& config, TrainTrace* trace) {
    if (dataset.empty()) throw std::invalid_argument("train_iteration: empty dataset");
    check_params(params_prev, domain.feature_dim());
    const auto records = prepare_records(dataset, domain);
    const double kl_weight = config.kl_weight;

    Objective objective;
    objective.size = records.size();
    objective.value = [&](const PolicyParams& p, std::span<const std::size_t> idx) {
        double total = 0.0;
        for (std::size_t i : idx) total += record_loss(p, params_prev, records[i], kl_weight);
        return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
    };
    objective.gradient = [&](const PolicyParams& p, std::span<const std::size_t> idx) {
        std::vector<double> g(p.weights.size(), 0.0);
        for (std::size_t i : idx)
            add_record_grad(p, params_prev, records[i], kl_weight, 1.0 / static_cast<double>(idx.size()), g);
        return g;
    };
    return minimize(params_prev, objective, config, trace);
}

bool accuracy_improved(double previous, double current, double current_stderr) {
    return current - previous > current_stderr;
}

ProblemSampler::ProblemSampler(std::size_t pool_size, std::uint64_t seed) : order_(pool_size), seed_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    reshuffle();
}

void ProblemSampler::reshuffle() {
    Rng rng(derive_seed(seed_, "pool-order", round_++));
    rng.shuffle(std::span<std::size_t>(order_));
    cursor_ = 0;
}

std::vector<std::size_t> ProblemSampler::next(std::size_t count) {
    if (count > order_.size()) throw std::invalid_argument("ProblemSampler: request exceeds pool size");
    std::vector<std::size_t> out;
    std::unordered_set<std::size_t> taken;
    while (out.size() < count) {
        if (cursor_ == order_.size()) reshuffle();
        const std::size_t idx = order_[cursor_++];
        if (taken.insert(idx).second) out.push_back(idx);
    }
    return out;
}

LoopResult run_iterative(const PolicyParams& initial, std::span<const Problem> pool,
                         std::span<const Problem> eval_problems, const ReasoningDomain& domain,
                         const TrainConfig& train, const EvalConfig& eval, int threads, const IterationStep& step) {
    train.validate();
    eval.validate();
    if (pool.size() < static_cast<std::size_t>(train.problems_per_iteration))
        throw std::invalid_argument("problem pool is smaller than train.problems_per_iteration");

    LoopResult result;
    result.initial_eval = evaluate(initial, eval_problems, domain, eval, threads);
    ProblemSampler sampler(pool.size(), derive_seed(train.rng_seed, "sampler"));
    PolicyParams current = initial;
    double previous_accuracy = result.initial_eval.accuracy_mean;
    result.stop_reason = "max_iterations";

    for (int it = 1; it <= train.max_iterations; ++it) {
        const auto started = std::chrono::steady_clock::now();
        std::vector<Problem> batch;
        for (std::size_t i : sampler.next(static_cast<std::size_t>(train.problems_per_iteration)))
            batch.push_back(pool[i]);

        IterationOutput out = step(current, batch, it);
        IterationReport report;
        report.iteration = it;
        report.dataset_size = out.dataset_size;
        report.epoch_losses = std::move(out.epoch_losses);
        report.generation = out.generation;
        report.eval = evaluate(out.params, eval_problems, domain, eval, threads);
        report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

        log_info("iteration " + std::to_string(it) + ": dataset " + std::to_string(report.dataset_size) +
                 ", accuracy " + std::to_string(report.eval.accuracy_mean) + " +- " +
                 std::to_string(report.eval.accuracy_stderr));

        const double acc = report.eval.accuracy_mean;
        const double se = report.eval.accuracy_stderr;
        result.params.push_back(out.params);
        result.reports.push_back(std::move(report));
        if (acc > result.reports[result.best].eval.accuracy_mean) result.best = result.params.size() - 1;
        current = std::move(out.params);

        if (result.reports.back().dataset_size == 0) {
            result.stop_reason = "empty_dataset";
            break;
        }
        if (train.early_stop && !accuracy_improved(previous_accuracy, acc, se)) {
            result.stop_reason = "converged";
            break;
        }
        previous_accuracy = acc;
    }
    return result;
}

LoopResult run_self_training(const PolicyParams& initial, std::span<const Problem> pool,
                             std::span<const Problem> eval_problems, const ReasoningDomain& domain,
                             const SearchConfig& search, const ScoringConfig& scoring, const TrainConfig& train,
                             const EvalConfig& eval, int threads) {
    auto step = [&](const PolicyParams& prev, std::span<const Problem> problems, int it) {
        SearchConfig s = search;
        s.rng_seed = derive_seed(search.rng_seed, "iteration", static_cast<std::uint64_t>(it));
        IterationOutput out;
        const auto dataset = generate_dataset(problems, prev, domain, s, scoring, threads, &out.generation);
        out.dataset_size = dataset.size();
        if (dataset.empty()) {
            out.params = prev;
            return out;
        }
        TrainConfig t = train;
        t.rng_seed = derive_seed(train.rng_seed, "train", static_cast<std::uint64_t>(it));
        TrainTrace trace;
        out.params = train_iteration(prev, dataset, domain, t, &trace);
        out.epoch_losses = std::move(trace.epoch_losses);
        return out;
    };
    return run_iterative(initial, pool, eval_problems, domain, train, eval, threads, step);
}

}  // namespace stepmcts
