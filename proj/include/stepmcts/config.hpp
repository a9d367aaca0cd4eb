#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stepmcts/baselines.hpp"
#include "stepmcts/evaluation.hpp"
#include "stepmcts/search_tree.hpp"
#include "stepmcts/step_scoring.hpp"
#include "stepmcts/trainer.hpp"

namespace stepmcts {

class ConfigError : public std::runtime_error {
public:
    enum class Kind { MissingFile, Parse, UnknownKey, OutOfRange };

    ConfigError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct DataConfig {
    Family family = Family::A;
    Family eval_family = Family::B;  ///< target family for `transfer`
    int pool_size = 500;
    int eval_size = 200;
    int min_difficulty = 2;
    int max_difficulty = 5;
    std::string problems_file;  ///< optional problem-set JSONL replacing the generated pool
};

struct PathConfig {
    std::string checkpoint;  ///< input checkpoint for train/generate/eval/transfer
    std::string dataset;     ///< input dataset for train
};

/// Everything a run needs. Component rng seeds are derived from `seed`.
struct ExperimentConfig {
    std::uint64_t seed = 2024;
    std::string method = "ours";
    int threads = 1;
    std::string out_dir = "runs/default";
    bool dump_trees = false;

    DataConfig data;
    SearchConfig search;
    ScoringConfig scoring;
    TrainConfig train;
    EvalConfig eval;
    BaselineConfig baseline;
    PathConfig paths;

    /// Throws ConfigError(OutOfRange).
    void validate() const;
};

/// Parses `section.key=value` lines; '#' starts a comment. Unset keys keep
/// their defaults. The result is validated.
ExperimentConfig parse_config(std::string_view text, std::string_view origin = "<string>");

/// Throws ConfigError(MissingFile) when `path` does not exist.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key=value` override (CLI --set).
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every key with its resolved value, one per line, in a fixed order.
/// parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig& config);

std::vector<std::string> config_keys();

}  // namespace stepmcts
