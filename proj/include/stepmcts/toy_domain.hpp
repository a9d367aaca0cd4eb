#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stepmcts/rng.hpp"

namespace stepmcts {

/// Task family. A: flat chains over {+, *}. B: {+, -, *} with parentheses.
enum class Family { A, B };

std::string_view family_name(Family family);
/// Accepts "A" or "B"; throws std::invalid_argument otherwise.
Family parse_family(std::string_view name);

/// A task instance (x, y).
struct Problem {
    std::string text;
    std::int64_t answer = 0;
    Family family = Family::A;
    int difficulty = 0;  ///< operator count

    bool operator==(const Problem&) const = default;
};

/// Ordered list of reasoning steps taken so far.
using Partial = std::vector<std::string>;

/// What a policy sees of one candidate next step.
struct StepOption {
    std::string text;
    std::vector<double> features;
    bool is_final = false;
};

/// Adapter seam between the search/training machinery and whatever produces
/// candidate steps. Candidates depend only on the problem text and the steps
/// taken so far; only `verify_answer` may look at the ground truth.
class ReasoningDomain {
public:
    virtual ~ReasoningDomain() = default;

    virtual std::size_t feature_dim() const = 0;

    /// Candidate next steps with features. Throws std::invalid_argument when
    /// the partial is not a valid history or already ends in a final step.
    virtual std::vector<StepOption> step_options(std::string_view problem_text,
                                                 std::span<const std::string> partial) const = 0;

    virtual bool is_final_step(std::string_view step) const = 0;

    /// 1.0 iff the final step's answer equals the ground truth.
    virtual double verify_answer(const Problem& problem, std::string_view final_step) const = 0;
};

/// A candidate step together with the structure it was built from.
/// `is_correct_reduction` is a hidden label for test oracles; features never
/// read it.
struct CandidateStep {
    std::string text;
    bool is_final = false;
    bool is_correct_reduction = false;

    // Reduction steps: "lhs op rhs = claimed".
    char op = 0;
    std::int64_t lhs = 0;
    std::int64_t rhs = 0;
    std::int64_t claimed = 0;
    bool top_precedence = false;  ///< op has the highest precedence present in the expression
    std::size_t op_ordinal = 0;   ///< index among reducible operations, left to right
    std::size_t op_count = 0;

    // Final steps: "The final answer is claimed." against the running value.
    std::int64_t running_value = 0;
};

/// Synthetic multi-step arithmetic. Each step reduces one operation that an
/// ordinary evaluator could perform next; every reducible operation offers the
/// correct value plus value-1 and value+1 distractors. Once a single number
/// remains, the candidates are final answers (value, value-1, value+1).
class ArithmeticDomain final : public ReasoningDomain {
public:
    enum Feature : std::size_t {
        kAddConsistent = 0,
        kSubConsistent,
        kMulConsistent,
        kOpAdd,
        kOpSub,
        kOpMul,
        kTopPrecedence,
        kRank,
        kFinal,
        kFinalConsistent,
        kFeatureDim
    };

    std::size_t feature_dim() const override { return kFeatureDim; }

    std::vector<StepOption> step_options(std::string_view problem_text,
                                         std::span<const std::string> partial) const override;

    bool is_final_step(std::string_view step) const override;

    /// Throws std::invalid_argument when `final_step` is not a final step.
    double verify_answer(const Problem& problem, std::string_view final_step) const override;

    /// Throws std::invalid_argument for histories that do not apply to the
    /// running expression, and for histories that already ended.
    std::vector<CandidateStep> enumerate_candidates(std::string_view problem_text,
                                                    std::span<const std::string> partial) const;

    /// Running expression after replaying `partial`, rendered as text.
    std::string running_expression(std::string_view problem_text,
                                   std::span<const std::string> partial) const;

    /// Features never use the ground truth; consistency is checked by
    /// re-evaluating the quoted operation.
    static std::vector<double> featurize(const CandidateStep& candidate);

    /// Sum of the three per-operator local consistency indicators.
    static double local_consistency(std::span<const double> features);
};

/// Integer answer of a final step, if `step` is one.
bool parse_final_answer(std::string_view step, std::int64_t& value);

std::string final_step_text(std::int64_t value);

/// Random expression with `difficulty` operators and operands in [1, 9].
/// Throws std::invalid_argument for difficulty outside [2, 5].
Problem generate_problem(Family family, int difficulty, Rng& rng);

/// `count` problems with difficulty drawn uniformly from [min_difficulty,
/// max_difficulty]; problem i uses its own derived stream.
std::vector<Problem> generate_problems(Family family, std::size_t count, int min_difficulty,
                                       int max_difficulty, std::uint64_t seed);

}  // namespace stepmcts
