#pragma once

#include <filesystem>
#include <iosfwd>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepmcts/policy.hpp"
#include "stepmcts/step_scoring.hpp"
#include "stepmcts/toy_domain.hpp"

namespace stepmcts {

/// A required input file is absent. `path` names what was expected.
class MissingArtifact : public std::runtime_error {
public:
    explicit MissingArtifact(const std::filesystem::path& path, const std::string& what = "required artifact")
        : std::runtime_error(what + " not found: " + path.string()), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

/// Malformed file contents.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Problem sets: {"text": str, "answer": int, "family": "A"|"B", "difficulty": int}
void write_problems_jsonl(std::ostream& out, std::span<const Problem> problems);
std::vector<Problem> read_problems_jsonl(std::istream& in);

// Datasets: {"problem": str, "partial": [str, ...], "step": str, "score": number}
void write_dataset_jsonl(std::ostream& out, std::span<const TrainingExample> records);
std::vector<TrainingExample> read_dataset_jsonl(std::istream& in);

/// Steps joined with the blank-line delimiter, for display.
std::string join_steps(std::span<const std::string> steps);

/// Policy weights plus provenance. The text format stores each weight with
/// shortest round-trip formatting, so save/load is bit-exact.
struct Checkpoint {
    PolicyParams params;
    std::string method = "initial";
    int iteration = 0;
    std::optional<Family> family;  ///< training family, if trained

    bool operator==(const Checkpoint&) const = default;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws MissingArtifact when the file is absent.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// One row per (method, iteration, eval family).
struct ResultRow {
    std::string method;
    int iteration = 0;
    std::string train_family;  ///< "-" for untrained policies
    std::string eval_family;
    double accuracy = 0.0;
    double stderr_ = 0.0;
    int num_runs = 0;
    int num_problems = 0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kResultsHeader =
    "method,iteration,train_family,eval_family,accuracy,stderr,num_runs,num_problems,seed";

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Fixed-precision formatting used by every CSV writer.
std::string format_fixed(double v, int digits = 6);

/// Writes `contents` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& contents);
/// Throws MissingArtifact when the file is absent.
std::string read_text_file(const std::filesystem::path& path, const std::string& what = "required artifact");

}  // namespace stepmcts
