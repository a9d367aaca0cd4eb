#pragma once

// Reference computations written without the library, used to freeze expected
// values and cross-check the implementation.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

inline double ucb(double q, int n, int parent_n, double c) {
    if (n == 0) return std::numeric_limits<double>::infinity();
    return q / n + c * std::sqrt(std::log(static_cast<double>(parent_n)) / n);
}

/// alpha * N_k * (Q_k/N_k - pooled mean), pooled over the given siblings.
inline std::vector<double> relative_scores(const std::vector<std::pair<double, int>>& qn, double alpha) {
    double sq = 0, sn = 0;
    for (auto [q, n] : qn) {
        sq += q;
        sn += n;
    }
    std::vector<double> out;
    for (auto [q, n] : qn) out.push_back(alpha * n * (q / n - sq / sn));
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0;
    std::vector<double> p;
    for (double v : z) {
        p.push_back(std::exp(v - m));
        s += p.back();
    }
    for (double& v : p) v /= s;
    return p;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
    double out = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0) out += p[i] * std::log(p[i] / q[i]);
    return out;
}

inline double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

/// Central differences of f at w.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> w, double h = 1e-5) {
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + h;
        const double up = f(w);
        w[i] = keep - h;
        const double down = f(w);
        w[i] = keep;
        g[i] = (up - down) / (2 * h);
    }
    return g;
}

/// max_i |a_i - b_i| / max(1, max_i |b_i|)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0, scale = 1;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

/// Recursive-descent evaluator for integer expressions over + - * and
/// parentheses, with the usual precedence and left associativity.
class Evaluator {
public:
    explicit Evaluator(std::string text) : s_(std::move(text)) {}

    std::int64_t run() {
        const auto v = expr();
        if (i_ != s_.size()) throw std::runtime_error("trailing input in '" + s_ + "'");
        return v;
    }

private:
    std::int64_t expr() {
        auto v = term();
        while (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) {
            const char op = s_[i_++];
            const auto r = term();
            v = op == '+' ? v + r : v - r;
        }
        return v;
    }
    std::int64_t term() {
        auto v = atom();
        while (i_ < s_.size() && s_[i_] == '*') {
            ++i_;
            v *= atom();
        }
        return v;
    }
    std::int64_t atom() {
        if (i_ < s_.size() && s_[i_] == '(') {
            ++i_;
            const auto v = expr();
            if (i_ >= s_.size() || s_[i_] != ')') throw std::runtime_error("unbalanced '" + s_ + "'");
            ++i_;
            return v;
        }
        bool neg = false;
        if (i_ < s_.size() && s_[i_] == '-') {
            neg = true;
            ++i_;
        }
        if (i_ >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[i_])))
            throw std::runtime_error("expected a number in '" + s_ + "'");
        std::int64_t v = 0;
        while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) v = v * 10 + (s_[i_++] - '0');
        return neg ? -v : v;
    }

    std::string s_;
    std::size_t i_ = 0;
};

inline std::int64_t evaluate(const std::string& text) { return Evaluator(text).run(); }

}  // namespace oracle
