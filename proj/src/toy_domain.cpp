#include "stepmcts/toy_domain.hpp"

#include <algorithm>
#include <charconv>
#include <memory>
#include <stdexcept>
#include <unordered_set>

namespace stepmcts {

namespace {

constexpr std::string_view kFinalPrefix = "The final answer is ";

struct Token {
    enum Kind { Num, Op, LParen, RParen } kind;
    std::int64_t value = 0;
    char op = 0;
};

int precedence(char op) { return op == '*' ? 2 : 1; }

std::int64_t apply_op(char op, std::int64_t a, std::int64_t b) {
    switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    case '*': return a * b;
    }
    throw std::logic_error("unknown operator");
}

std::string render_operand(std::int64_t v) {
    return v < 0 ? "(" + std::to_string(v) + ")" : std::to_string(v);
}

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    for (std::size_t i = 0; i < text.size();) {
        const char c = text[i];
        if (c >= '0' && c <= '9') {
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + text.size(), v);
            if (ec != std::errc{}) throw std::invalid_argument("bad number in problem text");
            i = static_cast<std::size_t>(ptr - text.data());
            tokens.push_back({Token::Num, v, 0});
            continue;
        }
        if (c == '+' || c == '-' || c == '*') {
            tokens.push_back({Token::Op, 0, c});
        } else if (c == '(') {
            tokens.push_back({Token::LParen, 0, 0});
        } else if (c == ')') {
            tokens.push_back({Token::RParen, 0, 0});
        } else if (c != ' ') {
            throw std::invalid_argument("unexpected character in problem text: " + std::string(text));
        }
        ++i;
    }
    if (tokens.empty()) throw std::invalid_argument("empty problem text");
    return tokens;
}

std::string render(const std::vector<Token>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        switch (t.kind) {
        case Token::Num: out += render_operand(t.value); break;
        case Token::Op: out += t.op; break;
        case Token::LParen: out += '('; break;
        case Token::RParen: out += ')'; break;
        }
    }
    return out;
}

struct ExprState {
    std::vector<Token> tokens;
    bool finished = false;

    bool single_number() const { return tokens.size() == 1 && tokens[0].kind == Token::Num; }
};

struct Located {
    CandidateStep step;
    std::size_t position = 0;  // operator token index
};

// Operations an ordinary left-to-right, precedence-respecting evaluator could
// perform next without changing the value.
std::vector<std::size_t> reducible_ops(const std::vector<Token>& tokens) {
    std::vector<std::size_t> out;
    const std::size_t n = tokens.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (tokens[i].kind != Token::Op) continue;
        if (tokens[i - 1].kind != Token::Num || tokens[i + 1].kind != Token::Num) continue;
        if (tokens[i].op == '*') {
            out.push_back(i);
            continue;
        }
        // Group bounds: nearest unmatched parens around i.
        std::size_t lo = 0;
        int depth = 0;
        for (std::size_t j = i; j-- > 0;) {
            if (tokens[j].kind == Token::RParen) ++depth;
            if (tokens[j].kind == Token::LParen) {
                if (depth == 0) {
                    lo = j + 1;
                    break;
                }
                --depth;
            }
        }
        std::size_t hi = n;
        depth = 0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (tokens[j].kind == Token::LParen) ++depth;
            if (tokens[j].kind == Token::RParen) {
                if (depth == 0) {
                    hi = j;
                    break;
                }
                --depth;
            }
        }
        bool has_mul = false;
        std::size_t first_op = n;
        depth = 0;
        for (std::size_t j = lo; j < hi; ++j) {
            if (tokens[j].kind == Token::LParen) ++depth;
            if (tokens[j].kind == Token::RParen) --depth;
            if (depth == 0 && tokens[j].kind == Token::Op) {
                if (tokens[j].op == '*') has_mul = true;
                if (first_op == n) first_op = j;
            }
        }
        if (!has_mul && first_op == i) out.push_back(i);
    }
    return out;
}

std::vector<Located> candidates_for(const ExprState& state) {
    std::vector<Located> out;
    std::unordered_set<std::string> seen;
    if (state.finished) throw std::invalid_argument("solution already ended with a final step");

    if (state.single_number()) {
        const std::int64_t v = state.tokens[0].value;
        for (std::int64_t claimed : {v, v - 1, v + 1}) {
            Located c;
            c.step.text = final_step_text(claimed);
            c.step.is_final = true;
            c.step.is_correct_reduction = claimed == v;
            c.step.claimed = claimed;
            c.step.running_value = v;
            out.push_back(std::move(c));
        }
        return out;
    }

    int max_prec = 0;
    for (const auto& t : state.tokens)
        if (t.kind == Token::Op) max_prec = std::max(max_prec, precedence(t.op));

    const auto ops = reducible_ops(state.tokens);
    if (ops.empty()) throw std::logic_error("no reducible operation in " + render(state.tokens));
    for (std::size_t k = 0; k < ops.size(); ++k) {
        const std::size_t i = ops[k];
        const char op = state.tokens[i].op;
        const std::int64_t a = state.tokens[i - 1].value;
        const std::int64_t b = state.tokens[i + 1].value;
        const std::int64_t value = apply_op(op, a, b);
        for (std::int64_t claimed : {value, value - 1, value + 1}) {
            Located c;
            c.position = i;
            c.step.text = render_operand(a) + op + render_operand(b) + " = " + std::to_string(claimed);
            if (!seen.insert(c.step.text).second) continue;  // same text at a later position
            c.step.op = op;
            c.step.lhs = a;
            c.step.rhs = b;
            c.step.claimed = claimed;
            c.step.is_correct_reduction = claimed == value;
            c.step.top_precedence = precedence(op) == max_prec;
            c.step.op_ordinal = k;
            c.step.op_count = ops.size();
            out.push_back(std::move(c));
        }
    }
    return out;
}

void apply(ExprState& state, const Located& c) {
    if (c.step.is_final) {
        state.finished = true;
        return;
    }
    auto& t = state.tokens;
    const std::size_t i = c.position;
    t[i - 1] = Token{Token::Num, c.step.claimed, 0};
    t.erase(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i) + 2);
    std::size_t at = i - 1;
    while (at > 0 && at + 1 < t.size() && t[at - 1].kind == Token::LParen && t[at + 1].kind == Token::RParen) {
        t.erase(t.begin() + static_cast<std::ptrdiff_t>(at) + 1);
        t.erase(t.begin() + static_cast<std::ptrdiff_t>(at) - 1);
        --at;
    }
}

ExprState replay(std::string_view problem_text, std::span<const std::string> partial) {
    ExprState state{tokenize(problem_text), false};
    for (const auto& step : partial) {
        const auto cands = candidates_for(state);
        auto it = std::find_if(cands.begin(), cands.end(),
                               [&](const Located& c) { return c.step.text == step; });
        if (it == cands.end())
            throw std::invalid_argument("step '" + step + "' does not apply to '" + render(state.tokens) + "'");
        apply(state, *it);
    }
    return state;
}

// Expression tree used only by the generator.
struct GenNode {
    char op = 0;  // 0 for leaf
    std::int64_t value = 0;
    std::unique_ptr<GenNode> left, right;
};

std::unique_ptr<GenNode> random_tree(int ops, Rng& rng) {
    auto node = std::make_unique<GenNode>();
    if (ops == 0) {
        node->value = rng.range(1, 9);
        return node;
    }
    static constexpr char kOps[] = {'+', '-', '*'};
    const int left_ops = static_cast<int>(rng.range(0, ops - 1));
    node->op = kOps[rng.below(3)];
    node->left = random_tree(left_ops, rng);
    node->right = random_tree(ops - 1 - left_ops, rng);
    return node;
}

std::int64_t eval_tree(const GenNode& n) {
    if (n.op == 0) return n.value;
    return apply_op(n.op, eval_tree(*n.left), eval_tree(*n.right));
}

std::string render_tree(const GenNode& n) {
    if (n.op == 0) return std::to_string(n.value);
    auto wrap = [&](const GenNode& child, bool is_right) {
        std::string s = render_tree(child);
        if (child.op == 0) return s;
        const int pc = precedence(child.op), pp = precedence(n.op);
        if (pc < pp || (is_right && pc == pp)) return "(" + s + ")";
        return s;
    };
    return wrap(*n.left, false) + n.op + wrap(*n.right, true);
}

}  // namespace

std::string_view family_name(Family family) { return family == Family::A ? "A" : "B"; }

Family parse_family(std::string_view name) {
    if (name == "A") return Family::A;
    if (name == "B") return Family::B;
    throw std::invalid_argument("unknown family '" + std::string(name) + "' (expected A or B)");
}

bool parse_final_answer(std::string_view step, std::int64_t& value) {
    if (!step.starts_with(kFinalPrefix) || !step.ends_with('.')) return false;
    std::string_view num = step.substr(kFinalPrefix.size(), step.size() - kFinalPrefix.size() - 1);
    std::string_view digits = num.starts_with('-') ? num.substr(1) : num;
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return false;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
    return ec == std::errc{} && ptr == num.data() + num.size();
}

std::string final_step_text(std::int64_t value) {
    return std::string(kFinalPrefix) + std::to_string(value) + ".";
}

bool ArithmeticDomain::is_final_step(std::string_view step) const {
    std::int64_t v = 0;
    return parse_final_answer(step, v);
}

double ArithmeticDomain::verify_answer(const Problem& problem, std::string_view final_step) const {
    std::int64_t v = 0;
    if (!parse_final_answer(final_step, v))
        throw std::invalid_argument("not a final step: '" + std::string(final_step) + "'");
    return v == problem.answer ? 1.0 : 0.0;
}

std::vector<CandidateStep> ArithmeticDomain::enumerate_candidates(std::string_view problem_text,
                                                                  std::span<const std::string> partial) const {
    auto located = candidates_for(replay(problem_text, partial));
    std::vector<CandidateStep> out;
    out.reserve(located.size());
    for (auto& c : located) out.push_back(std::move(c.step));
    return out;
}

std::string ArithmeticDomain::running_expression(std::string_view problem_text,
                                                 std::span<const std::string> partial) const {
    return render(replay(problem_text, partial).tokens);
}

std::vector<StepOption> ArithmeticDomain::step_options(std::string_view problem_text,
                                                       std::span<const std::string> partial) const {
    auto cands = enumerate_candidates(problem_text, partial);
    std::vector<StepOption> out;
    out.reserve(cands.size());
    for (auto& c : cands) {
        auto features = featurize(c);
        out.push_back({std::move(c.text), std::move(features), c.is_final});
    }
    return out;
}

std::vector<double> ArithmeticDomain::featurize(const CandidateStep& c) {
    std::vector<double> f(kFeatureDim, 0.0);
    if (c.is_final) {
        f[kFinal] = 1.0;
        f[kFinalConsistent] = c.claimed == c.running_value ? 1.0 : 0.0;
        return f;
    }
    const bool consistent = apply_op(c.op, c.lhs, c.rhs) == c.claimed;
    switch (c.op) {
    case '+':
        f[kOpAdd] = 1.0;
        f[kAddConsistent] = consistent ? 1.0 : 0.0;
        break;
    case '-':
        f[kOpSub] = 1.0;
        f[kSubConsistent] = consistent ? 1.0 : 0.0;
        break;
    case '*':
        f[kOpMul] = 1.0;
        f[kMulConsistent] = consistent ? 1.0 : 0.0;
        break;
    }
    f[kTopPrecedence] = c.top_precedence ? 1.0 : 0.0;
    f[kRank] = c.op_count > 1 ? static_cast<double>(c.op_ordinal) / static_cast<double>(c.op_count - 1) : 0.0;
    return f;
}

double ArithmeticDomain::local_consistency(std::span<const double> f) {
    return f[kAddConsistent] + f[kSubConsistent] + f[kMulConsistent];
}

Problem generate_problem(Family family, int difficulty, Rng& rng) {
    if (difficulty < 2 || difficulty > 5)
        throw std::invalid_argument("difficulty must be in [2, 5], got " + std::to_string(difficulty));
    Problem p;
    p.family = family;
    p.difficulty = difficulty;
    if (family == Family::A) {
        // Flat chain: answer is the sum of the products.
        std::int64_t term = rng.range(1, 9);
        std::int64_t sum = 0;
        p.text = std::to_string(term);
        for (int k = 0; k < difficulty; ++k) {
            const bool mul = rng.below(2) == 1;
            const std::int64_t v = rng.range(1, 9);
            p.text += mul ? '*' : '+';
            p.text += std::to_string(v);
            if (mul) {
                term *= v;
            } else {
                sum += term;
                term = v;
            }
        }
        p.answer = sum + term;
        return p;
    }
    for (;;) {
        auto tree = random_tree(difficulty, rng);
        std::string text = render_tree(*tree);
        if (text.find('(') == std::string::npos) continue;
        p.text = std::move(text);
        p.answer = eval_tree(*tree);
        return p;
    }
}

std::vector<Problem> generate_problems(Family family, std::size_t count, int min_difficulty,
                                       int max_difficulty, std::uint64_t seed) {
    if (min_difficulty > max_difficulty) throw std::invalid_argument("min_difficulty > max_difficulty");
    std::vector<Problem> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, "problem", i));
        const int d = static_cast<int>(rng.range(min_difficulty, max_difficulty));
        out.push_back(generate_problem(family, d, rng));
    }
    return out;
}

}  // namespace stepmcts
