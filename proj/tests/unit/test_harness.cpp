#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stepmcts/config.hpp"
#include "stepmcts/experiment.hpp"
#include "stepmcts/io.hpp"
#include "stepmcts/rng.hpp"

using namespace stepmcts;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("stepmcts_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig c = parse_config(
        "seed=7\n"
        "data.pool_size=40\n"
        "data.eval_size=20\n"
        "data.max_difficulty=3\n"
        "search.num_simulations=8\n"
        "train.problems_per_iteration=10\n"
        "train.max_iterations=2\n"
        "eval.num_runs=2\n"
        "baseline.rft_samples=4\n");
    c.out_dir = out.string();
    return c;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

ConfigError::Kind error_kind(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.kind();
    }
    FAIL("no error raised for: " << text);
    return ConfigError::Kind::Parse;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("an empty config is all defaults") {
    const auto c = parse_config("");
    CHECK(c.seed == 2024);
    CHECK(c.search.num_simulations == 32);
    CHECK(c.scoring.alpha == 1.0);
    CHECK(c.train.kl_weight == 1.0);
    CHECK(c.eval.num_runs == 4);
    CHECK(c.baseline.dpo_beta == 0.1);
    CHECK(c.method == "ours");
}

TEST_CASE("config errors are distinguished") {
    CHECK(error_kind("search.sample_temperature=0") == ConfigError::Kind::OutOfRange);
    CHECK(error_kind("threads=0") == ConfigError::Kind::OutOfRange);
    CHECK(error_kind("data.min_difficulty=1") == ConfigError::Kind::OutOfRange);
    CHECK(error_kind("method=sft") == ConfigError::Kind::OutOfRange);
    CHECK(error_kind("search.bogus=1") == ConfigError::Kind::UnknownKey);
    CHECK(error_kind("search.num_simulations=lots") == ConfigError::Kind::Parse);
    CHECK(error_kind("just words") == ConfigError::Kind::Parse);
    CHECK(error_kind("data.family=C") == ConfigError::Kind::Parse);
    try {
        load_config("/nonexistent/stepmcts.conf");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.kind() == ConfigError::Kind::MissingFile);
    }
}

TEST_CASE("parse errors name the line") {
    try {
        parse_config("seed=1\n# comment\n\nbad line\n", "exp.conf");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("exp.conf:4") != std::string::npos);
    }
}

TEST_CASE("comments and whitespace are ignored") {
    const auto c = parse_config("  search.ucb_c = 0.5   # tighter\n# seed=1\nscoring.alpha=2\n");
    CHECK(c.search.ucb_c == 0.5);
    CHECK(c.scoring.alpha == 2.0);
    CHECK(c.seed == 2024);
}

TEST_CASE("dump then reload is the identity") {
    ExperimentConfig c;
    c.search.ucb_c = 0.1 + 0.2;
    c.scoring.alpha = 1.0 / 3.0;
    c.data.family = Family::B;
    c.data.eval_family = Family::A;
    c.train.early_stop = false;
    c.paths.checkpoint = "ckpt/x.ckpt";
    const auto text = dump_config(c);
    const auto back = parse_config(text);
    CHECK(dump_config(back) == text);
    CHECK(back.search.ucb_c == c.search.ucb_c);
    CHECK(back.scoring.alpha == c.scoring.alpha);
    CHECK(config_keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("checkpoints round-trip bit for bit") {
    Rng rng(3);
    Checkpoint c;
    c.method = "ours";
    c.iteration = 2;
    c.family = Family::A;
    for (int i = 0; i < 10; ++i) c.params.weights.push_back((rng.uniform() - 0.5) * std::pow(10.0, rng.range(-8, 8)));
    c.params.weights.push_back(0.1 + 0.2);
    std::stringstream ss;
    write_checkpoint(ss, c);
    const auto back = read_checkpoint(ss);
    CHECK(back == c);
    for (std::size_t i = 0; i < c.params.weights.size(); ++i)
        CHECK(std::memcmp(&back.params.weights[i], &c.params.weights[i], sizeof(double)) == 0);
}

TEST_CASE("malformed checkpoints are rejected") {
    std::istringstream wrong_header("hello\n");
    CHECK_THROWS_AS(read_checkpoint(wrong_header), FormatError);
    std::istringstream short_weights("stepmcts-checkpoint 1\ndim 2\nmethod x\niteration 0\nfamily -\nw 1\n");
    CHECK_THROWS_AS(read_checkpoint(short_weights), FormatError);
    std::istringstream bad_weight("stepmcts-checkpoint 1\ndim 1\nmethod x\niteration 0\nfamily -\nw abc\n");
    CHECK_THROWS_AS(read_checkpoint(bad_weight), FormatError);
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), MissingArtifact);
}

TEST_CASE("problem and dataset files round-trip") {
    const auto problems = generate_problems(Family::B, 10, 2, 5, 1);
    std::stringstream ps;
    write_problems_jsonl(ps, problems);
    CHECK(read_problems_jsonl(ps) == problems);

    const std::vector<TrainingExample> records{{"2+3*4", {}, "3*4 = 12", 0.5},
                                               {"2+3*4", {"3*4 = 12"}, "2+12 = 14", -1.0 / 3.0}};
    std::stringstream ds;
    write_dataset_jsonl(ds, records);
    CHECK(ds.str().substr(0, ds.str().find('\n')) ==
          R"({"problem":"2+3*4","partial":[],"step":"3*4 = 12","score":0.5})");
    CHECK(read_dataset_jsonl(ds) == records);

    std::istringstream broken("{\"problem\": 1}\n");
    CHECK_THROWS_AS(read_dataset_jsonl(broken), FormatError);
}

TEST_CASE("steps join with a blank line") {
    const std::vector<std::string> steps{"3*4 = 12", "2+12 = 14", "The final answer is 14."};
    CHECK(join_steps(steps) == "3*4 = 12\n\n2+12 = 14\n\nThe final answer is 14.");
}

TEST_CASE("results CSV layout") {
    const std::vector<ResultRow> rows{{"ours", 1, "A", "A", 0.35, 0.0125, 4, 200, 2024},
                                      {"zero_shot", 0, "-", "B", 1.0 / 3.0, 0.0, 1, 3, 2024}};
    std::stringstream ss;
    write_results_csv(ss, rows);
    CHECK(ss.str() ==
          "method,iteration,train_family,eval_family,accuracy,stderr,num_runs,num_problems,seed\n"
          "ours,1,A,A,0.350000,0.012500,4,200,2024\n"
          "zero_shot,0,-,B,0.333333,0.000000,1,3,2024\n");
    const auto back = read_results_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].accuracy == doctest::Approx(0.333333));
}

TEST_CASE("eval problems are held out of the pool") {
    const auto c = small_config(scratch_dir("pool"));
    const auto sets = build_problem_sets(c, Family::A);
    CHECK(sets.pool.size() == 40);
    CHECK(sets.eval.size() == 20);
    for (const auto& e : sets.eval)
        for (const auto& p : sets.pool) CHECK(e.text != p.text);
    CHECK(build_eval_problems(c, Family::A) == sets.eval);
}

TEST_CASE("generate is deterministic and its stats match the file") {
    const auto dir = scratch_dir("generate");
    auto c = small_config(dir / "a");
    const auto s1 = cmd_generate(c);
    CHECK(line_count(s1.dataset_path) == s1.stats.records);
    c.out_dir = (dir / "b").string();
    c.threads = 3;
    const auto s2 = cmd_generate(c);
    CHECK(slurp(s1.dataset_path) == slurp(s2.dataset_path));
    CHECK(fs::exists(dir / "a" / "generate.config"));
    CHECK(fs::exists(dir / "a" / "generate.manifest"));
    CHECK(slurp(dir / "a" / "generate_stats.txt") == slurp(dir / "b" / "generate_stats.txt"));
}

TEST_CASE("empty problem set is an error") {
    const auto dir = scratch_dir("empty_pool");
    fs::create_directories(dir);
    write_text_file(dir / "problems.jsonl", "");
    auto c = small_config(dir);
    c.data.problems_file = (dir / "problems.jsonl").string();
    CHECK_THROWS_AS(cmd_generate(c), std::invalid_argument);
    c.data.problems_file = (dir / "missing.jsonl").string();
    CHECK_THROWS_AS(cmd_generate(c), MissingArtifact);
}

TEST_CASE("train consumes a generated dataset") {
    const auto dir = scratch_dir("train");
    auto c = small_config(dir);
    const auto summary = cmd_generate(c);
    c.paths.dataset = summary.dataset_path.string();
    const auto ckpt = cmd_train(c);
    CHECK(ckpt.iteration == 1);
    CHECK(ckpt.family == Family::A);
    CHECK(load_checkpoint(dir / "checkpoints" / "trained.ckpt") == ckpt);
    CHECK(ckpt.params != PolicyParams::zeros(ckpt.params.weights.size()));

    c.paths.dataset = (dir / "nope.jsonl").string();
    CHECK_THROWS_AS(cmd_train(c), MissingArtifact);
}

TEST_CASE("selftrain then eval reproduces the in-loop accuracy") {
    const auto dir = scratch_dir("selftrain");
    auto c = small_config(dir);
    const auto run = cmd_selftrain(c);
    REQUIRE(!run.iterations.empty());
    const int last = run.iterations.back();
    c.paths.checkpoint = (dir / "checkpoints" / ("ours_iter" + std::to_string(last) + ".ckpt")).string();
    const auto e = cmd_eval(c);
    CHECK(e.accuracy_mean == run.evals.back().accuracy_mean);
    CHECK(std::abs(e.accuracy_mean - run.evals.back().accuracy_mean) <= run.evals.back().accuracy_stderr);
    CHECK(fs::exists(dir / "results_ours.csv"));
    CHECK(fs::exists(dir / "iterations_ours.csv"));
    CHECK(fs::exists(dir / "checkpoints" / "ours_best.ckpt"));
    CHECK(fs::exists(dir / "selftrain.manifest"));
}

TEST_CASE("reruns are byte-identical across thread counts") {
    const auto dir = scratch_dir("rerun");
    auto c = small_config(dir / "one");
    cmd_selftrain(c);
    c.out_dir = (dir / "three").string();
    c.threads = 3;
    cmd_selftrain(c);
    for (const char* f : {"results_ours.csv", "iterations_ours.csv", "checkpoints/ours_best.ckpt"})
        CHECK(slurp(dir / "one" / f) == slurp(dir / "three" / f));
}

TEST_CASE("transfer needs a checkpoint from the other family") {
    const auto dir = scratch_dir("transfer");
    auto c = small_config(dir);
    CHECK(run_command("transfer", c) == kExitMissingArtifact);

    cmd_selftrain(c);
    c.paths.checkpoint = (dir / "checkpoints" / "ours_best.ckpt").string();
    c.data.eval_family = Family::A;
    CHECK(run_command("transfer", c) == kExitMissingArtifact);

    c.data.eval_family = Family::B;
    const auto rows = cmd_transfer(c);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].eval_family == "A");
    CHECK(rows[2].eval_family == "B");
    CHECK(rows[3].train_family == "A");
    CHECK(rows[3].method == "ours");
}

TEST_CASE("report renders missing iterations as /") {
    const auto dir = scratch_dir("report");
    fs::create_directories(dir);
    CHECK_THROWS_AS(cmd_report(dir), MissingArtifact);

    std::stringstream ss;
    const std::vector<ResultRow> zs{{"zero_shot", 0, "-", "A", 0.16, 0.01, 4, 200, 1}};
    write_results_csv(ss, zs);
    write_text_file(dir / "results_zero_shot.csv", ss.str());
    auto one = cmd_report(dir);
    CHECK(one.table ==
          "eval family A (accuracy %, mean +- stderr)\n"
          "method     iter 0\n"
          "zero_shot  16.00 +- 1.00\n\n");

    std::stringstream os;
    const std::vector<ResultRow> ours{{"ours", 2, "A", "A", 0.5, 0.02, 4, 200, 1},
                                      {"ours", 1, "A", "A", 0.35, 0.01, 4, 200, 1}};
    write_results_csv(os, ours);
    write_text_file(dir / "results_ours.csv", os.str());
    const auto two = cmd_report(dir);
    CHECK(two.table.find("zero_shot  16.00 +- 1.00  /              /") != std::string::npos);
    CHECK(two.table.find("ours       /              35.00 +- 1.00  50.00 +- 2.00") != std::string::npos);
    CHECK(slurp(dir / "plot_ours_A.dat") == "# iteration accuracy stderr\n1 0.350000 0.010000\n2 0.500000 0.020000\n");
}

TEST_CASE("commands map failures to exit codes") {
    const auto dir = scratch_dir("exit");
    auto c = small_config(dir);
    CHECK(run_command("report", c) == kExitMissingArtifact);
    CHECK(run_command("frobnicate", c) == kExitConfigError);
    c.threads = 0;
    CHECK(run_command("eval", c) == kExitConfigError);
    c.threads = 1;
    c.paths.checkpoint = (dir / "missing.ckpt").string();
    CHECK(run_command("eval", c) == kExitMissingArtifact);
    fs::create_directories(dir);
    write_text_file(dir / "bad.ckpt", "garbage\n");
    c.paths.checkpoint = (dir / "bad.ckpt").string();
    CHECK(run_command("eval", c) == kExitRuntimeFailure);
}

}
