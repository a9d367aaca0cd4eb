#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "stepmcts/baselines.hpp"
#include "stepmcts/config.hpp"
#include "stepmcts/io.hpp"

namespace stepmcts {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfigError = 2, kExitMissingArtifact = 3, kExitRuntimeFailure = 4 };

/// Search, train and eval seeds hashed from the top-level seed.
MethodSetup make_setup(const ExperimentConfig& config);

struct ProblemSets {
    std::vector<Problem> pool;
    std::vector<Problem> eval;
};

/// Held-out eval problems of `family` and a training pool disjoint from them
/// (by text). A non-empty data.problems_file replaces the generated pool.
ProblemSets build_problem_sets(const ExperimentConfig& config, Family family);

/// Held-out eval problems only; identical to build_problem_sets(...).eval.
std::vector<Problem> build_eval_problems(const ExperimentConfig& config, Family family);

struct GenerateSummary {
    GenerationStats stats;
    std::filesystem::path dataset_path;
};

/// Scored data from the checkpoint at paths.checkpoint (or the untrained
/// policy) on the same problems and seeds as the first self-training
/// iteration. Writes dataset.jsonl and generate_stats.txt; with dump_trees,
/// every root-position search tree goes to trees/.
GenerateSummary cmd_generate(const ExperimentConfig& config);

/// One training iteration on the dataset at paths.dataset, starting from
/// (and KL-anchored to) paths.checkpoint or the untrained policy.
/// Writes checkpoints/trained.ckpt and train_losses.csv.
Checkpoint cmd_train(const ExperimentConfig& config);

/// The self-training loop. Writes results_ours.csv, iterations_ours.csv,
/// checkpoints/ours_iter<k>.ckpt and checkpoints/ours_best.ckpt.
MethodRun cmd_selftrain(const ExperimentConfig& config);

/// Runs config.method (zero_shot, rft, step_dpo or ours). Writes
/// results_<method>.csv, iterations_<method>.csv and its checkpoints.
MethodRun cmd_baseline(const ExperimentConfig& config);

/// Evaluates paths.checkpoint (or the untrained policy) on the held-out
/// problems of data.family. Writes results_eval.csv.
EvalResult cmd_eval(const ExperimentConfig& config);

/// Evaluates paths.checkpoint, which must be trained on a family other than
/// data.eval_family, on both families next to the zero-shot floor.
/// Writes results_transfer.csv.
std::vector<ResultRow> cmd_transfer(const ExperimentConfig& config);

struct Report {
    std::string table;
    std::vector<std::filesystem::path> plot_files;
};

/// Reads every results*.csv in `dir`, returns an aligned method x iteration
/// table per eval family ("/" where an iteration was not run) and writes
/// plot_<method>_<family>.dat files sorted by iteration.
Report cmd_report(const std::filesystem::path& dir);

/// Every CSV row for one method run: iteration 0 for zero_shot, otherwise one
/// row per completed iteration.
std::vector<ResultRow> result_rows(const MethodRun& run, const ExperimentConfig& config);

/// Runs a named command, printing a one-line summary to stdout and errors to
/// stderr, and maps failures to exit codes.
int run_command(const std::string& name, const ExperimentConfig& config);

}  // namespace stepmcts
