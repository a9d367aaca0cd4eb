#pragma once

// Tiny ReasoningDomain implementations with hand-controlled candidate sets.

#include <map>
#include <string>
#include <vector>

#include "stepmcts/policy.hpp"
#include "stepmcts/toy_domain.hpp"

namespace testing {

using namespace stepmcts;

/// Offers exactly one candidate per position: chain[partial.size()]. Steps
/// past the end of the chain repeat the last entry when `endless`.
class ChainDomain final : public ReasoningDomain {
public:
    explicit ChainDomain(std::vector<std::string> chain, bool endless = false)
        : chain_(std::move(chain)), endless_(endless) {}

    std::size_t feature_dim() const override { return 1; }

    std::vector<StepOption> step_options(std::string_view, std::span<const std::string> partial) const override {
        std::size_t k = partial.size();
        if (k >= chain_.size()) {
            if (!endless_) throw std::invalid_argument("chain exhausted");
            k = chain_.size() - 1;
        }
        return {StepOption{chain_[k], {0.0}, is_final_step(chain_[k])}};
    }

    bool is_final_step(std::string_view step) const override {
        std::int64_t v;
        return parse_final_answer(step, v);
    }

    double verify_answer(const Problem& problem, std::string_view final_step) const override {
        std::int64_t v;
        if (!parse_final_answer(final_step, v)) throw std::invalid_argument("not a final step");
        return v == problem.answer ? 1.0 : 0.0;
    }

private:
    std::vector<std::string> chain_;
    bool endless_;
};

/// One decision per problem: a fixed table of final-answer candidates with
/// arbitrary features, keyed by problem text.
class TableDomain final : public ReasoningDomain {
public:
    explicit TableDomain(std::size_t dim) : dim_(dim) {}

    void set(const std::string& problem, std::vector<StepOption> options) { table_[problem] = std::move(options); }

    std::size_t feature_dim() const override { return dim_; }

    std::vector<StepOption> step_options(std::string_view problem, std::span<const std::string> partial) const override {
        if (!partial.empty()) throw std::invalid_argument("single-step domain");
        return table_.at(std::string(problem));
    }

    bool is_final_step(std::string_view step) const override {
        std::int64_t v;
        return parse_final_answer(step, v);
    }

    double verify_answer(const Problem& problem, std::string_view final_step) const override {
        std::int64_t v;
        if (!parse_final_answer(final_step, v)) throw std::invalid_argument("not a final step");
        return v == problem.answer ? 1.0 : 0.0;
    }

private:
    std::size_t dim_;
    std::map<std::string, std::vector<StepOption>> table_;
};

/// Weights that pick a locally consistent step whenever one exists.
inline PolicyParams oracle_params() {
    PolicyParams p = PolicyParams::zeros(ArithmeticDomain::kFeatureDim);
    p.weights[ArithmeticDomain::kAddConsistent] = 20.0;
    p.weights[ArithmeticDomain::kSubConsistent] = 20.0;
    p.weights[ArithmeticDomain::kMulConsistent] = 20.0;
    p.weights[ArithmeticDomain::kFinalConsistent] = 20.0;
    return p;
}

}  // namespace testing
