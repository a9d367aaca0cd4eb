#include "stepmcts/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "stepmcts/parallel.hpp"

namespace stepmcts {

void EvalConfig::validate() const {
    if (num_runs < 1) throw std::invalid_argument("eval.num_runs must be >= 1");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("eval.temperature must be > 0");
    if (depth_cap < 1) throw std::invalid_argument("eval.depth_cap must be >= 1");
}

EvalResult summarize_runs(std::span<const double> accs, int num_problems, Family family) {
    EvalResult r;
    r.num_runs = static_cast<int>(accs.size());
    r.num_problems = num_problems;
    r.family = family;
    r.run_accuracies.assign(accs.begin(), accs.end());
    if (accs.empty()) return r;
    double sum = 0.0;
    for (double a : accs) sum += a;
    r.accuracy_mean = sum / static_cast<double>(accs.size());
    if (accs.size() < 2) return r;
    double ss = 0.0;
    for (double a : accs) ss += (a - r.accuracy_mean) * (a - r.accuracy_mean);
    const double n = static_cast<double>(accs.size());
    r.accuracy_stderr = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    r.stderr_defined = true;
    return r;
}

double decode_solution(const PolicyParams& params, const Problem& problem, const ReasoningDomain& domain,
                       double temperature, int depth_cap, Rng& rng, Partial* steps) {
    Partial path;
    double reward = 0.0;
    for (int depth = 0; depth < depth_cap; ++depth) {
        const auto ctx = make_context(domain, problem.text, path);
        const std::size_t k = sample_index(logits(params, ctx), temperature, rng);
        path.push_back(ctx.candidates[k]);
        if (ctx.is_final[k]) {
            reward = domain.verify_answer(problem, path.back());
            break;
        }
    }
    if (steps) *steps = std::move(path);
    return reward;
}

EvalResult evaluate(const PolicyParams& params, std::span<const Problem> problems, const ReasoningDomain& domain,
                    const EvalConfig& config, int threads) {
    config.validate();
    check_params(params, domain.feature_dim());
    const std::size_t runs = static_cast<std::size_t>(config.num_runs);
    const std::size_t n = problems.size();
    std::vector<double> rewards(runs * n, 0.0);
    parallel_for(runs * n, threads, [&](std::size_t idx) {
        const std::size_t r = idx / n, i = idx % n;
        Rng rng(derive_seed(config.seed, "eval", r, i));
        rewards[idx] = decode_solution(params, problems[i], domain, config.temperature, config.depth_cap, rng);
    });
    std::vector<double> accs(runs, 0.0);
    for (std::size_t r = 0; r < runs; ++r) {
        double correct = 0.0;
        for (std::size_t i = 0; i < n; ++i) correct += rewards[r * n + i];
        accs[r] = n > 0 ? correct / static_cast<double>(n) : 0.0;
    }
    return summarize_runs(accs, static_cast<int>(n), problems.empty() ? Family::A : problems.front().family);
}

}  // namespace stepmcts
