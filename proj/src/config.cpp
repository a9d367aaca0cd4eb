#include "stepmcts/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace stepmcts {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void parse_fail(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError(ConfigError::Kind::Parse,
                      "cannot parse " + std::string(key) + "='" + std::string(value) + "' as " + std::string(expected));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
        parse_fail(key, v, std::is_floating_point_v<T> ? "a number" : "an integer");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    parse_fail(key, v, "a boolean");
}

Family parse_family_value(std::string_view key, std::string_view v) {
    if (v == "A") return Family::A;
    if (v == "B") return Family::B;
    parse_fail(key, v, "a family (A or B)");
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Field {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define STEPMCTS_INT_FIELD(name, member)                                                              \
    Field {                                                                                         \
        name, [](const ExperimentConfig& c) { return std::to_string(c.member); },                   \
            [](ExperimentConfig& c, std::string_view v) { c.member = parse_number<int>(name, v); }  \
    }
#define STEPMCTS_DOUBLE_FIELD(name, member)                                                            \
    Field {                                                                                          \
        name, [](const ExperimentConfig& c) { return format_double(c.member); },                     \
            [](ExperimentConfig& c, std::string_view v) { c.member = parse_number<double>(name, v); } \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
         [](ExperimentConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
        {"method", [](const ExperimentConfig& c) { return c.method; },
         [](ExperimentConfig& c, std::string_view v) { c.method = std::string(v); }},
        STEPMCTS_INT_FIELD("threads", threads),
        {"out_dir", [](const ExperimentConfig& c) { return c.out_dir; },
         [](ExperimentConfig& c, std::string_view v) { c.out_dir = std::string(v); }},
        {"dump_trees", [](const ExperimentConfig& c) { return std::string(c.dump_trees ? "true" : "false"); },
         [](ExperimentConfig& c, std::string_view v) { c.dump_trees = parse_bool("dump_trees", v); }},

        {"data.family", [](const ExperimentConfig& c) { return std::string(family_name(c.data.family)); },
         [](ExperimentConfig& c, std::string_view v) { c.data.family = parse_family_value("data.family", v); }},
        {"data.eval_family", [](const ExperimentConfig& c) { return std::string(family_name(c.data.eval_family)); },
         [](ExperimentConfig& c, std::string_view v) {
             c.data.eval_family = parse_family_value("data.eval_family", v);
         }},
        STEPMCTS_INT_FIELD("data.pool_size", data.pool_size),
        STEPMCTS_INT_FIELD("data.eval_size", data.eval_size),
        STEPMCTS_INT_FIELD("data.min_difficulty", data.min_difficulty),
        STEPMCTS_INT_FIELD("data.max_difficulty", data.max_difficulty),
        {"data.problems_file", [](const ExperimentConfig& c) { return c.data.problems_file; },
         [](ExperimentConfig& c, std::string_view v) { c.data.problems_file = std::string(v); }},

        STEPMCTS_INT_FIELD("search.num_simulations", search.num_simulations),
        STEPMCTS_DOUBLE_FIELD("search.ucb_c", search.ucb_c),
        STEPMCTS_INT_FIELD("search.max_children", search.max_children),
        STEPMCTS_INT_FIELD("search.max_expansion_attempts", search.max_expansion_attempts),
        STEPMCTS_DOUBLE_FIELD("search.sample_temperature", search.sample_temperature),
        STEPMCTS_INT_FIELD("search.rollout_depth_cap", search.rollout_depth_cap),

        STEPMCTS_DOUBLE_FIELD("scoring.alpha", scoring.alpha),
        STEPMCTS_INT_FIELD("scoring.max_solution_steps", scoring.max_solution_steps),
        STEPMCTS_DOUBLE_FIELD("scoring.zero_epsilon", scoring.zero_epsilon),

        STEPMCTS_DOUBLE_FIELD("train.learning_rate", train.learning_rate),
        STEPMCTS_INT_FIELD("train.epochs", train.epochs),
        STEPMCTS_INT_FIELD("train.batch_size", train.batch_size),
        STEPMCTS_DOUBLE_FIELD("train.kl_weight", train.kl_weight),
        STEPMCTS_INT_FIELD("train.problems_per_iteration", train.problems_per_iteration),
        STEPMCTS_INT_FIELD("train.max_iterations", train.max_iterations),
        {"train.early_stop", [](const ExperimentConfig& c) { return std::string(c.train.early_stop ? "true" : "false"); },
         [](ExperimentConfig& c, std::string_view v) { c.train.early_stop = parse_bool("train.early_stop", v); }},

        STEPMCTS_INT_FIELD("eval.num_runs", eval.num_runs),
        STEPMCTS_DOUBLE_FIELD("eval.temperature", eval.temperature),
        STEPMCTS_INT_FIELD("eval.depth_cap", eval.depth_cap),

        STEPMCTS_INT_FIELD("baseline.rft_samples", baseline.rft_samples),
        STEPMCTS_DOUBLE_FIELD("baseline.rft_temperature", baseline.rft_temperature),
        STEPMCTS_DOUBLE_FIELD("baseline.dpo_beta", baseline.dpo_beta),

        {"paths.checkpoint", [](const ExperimentConfig& c) { return c.paths.checkpoint; },
         [](ExperimentConfig& c, std::string_view v) { c.paths.checkpoint = std::string(v); }},
        {"paths.dataset", [](const ExperimentConfig& c) { return c.paths.dataset; },
         [](ExperimentConfig& c, std::string_view v) { c.paths.dataset = std::string(v); }},
    };
    return table;
}

#undef STEPMCTS_INT_FIELD
#undef STEPMCTS_DOUBLE_FIELD

}  // namespace

void ExperimentConfig::validate() const {
    auto range = [](const std::string& msg) { throw ConfigError(ConfigError::Kind::OutOfRange, msg); };
    try {
        search.validate();
        scoring.validate();
        train.validate();
        eval.validate();
        baseline.validate();
        parse_method(method);
    } catch (const std::invalid_argument& e) {
        range(e.what());
    }
    if (threads < 1) range("threads must be >= 1");
    if (out_dir.empty()) range("out_dir must not be empty");
    if (data.pool_size < 1) range("data.pool_size must be >= 1");
    if (data.eval_size < 1) range("data.eval_size must be >= 1");
    if (data.min_difficulty < 2 || data.max_difficulty > 5 || data.min_difficulty > data.max_difficulty)
        range("data difficulty range must satisfy 2 <= min_difficulty <= max_difficulty <= 5");
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(config, value);
            return;
        }
    }
    throw ConfigError(ConfigError::Kind::UnknownKey, "unknown config key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::string_view text, std::string_view origin) {
    ExperimentConfig config;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(ConfigError::Kind::Parse, std::string(origin) + ":" + std::to_string(line_no) +
                                                            ": expected key=value, got '" + std::string(line) + "'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            apply_setting(config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(e.kind(), std::string(origin) + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(ConfigError::Kind::MissingFile, "config file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string dump_config(const ExperimentConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += f.key + "=" + f.get(config) + "\n";
    return out;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.push_back(f.key);
    return keys;
}

}  // namespace stepmcts
