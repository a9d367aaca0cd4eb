#include "stepmcts/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stepmcts/log.hpp"
#include "stepmcts/rng.hpp"

namespace stepmcts {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t family_tag(Family f) { return f == Family::A ? 0 : 1; }

std::string train_family_label(const std::optional<Family>& f) {
    return f ? std::string(family_name(*f)) : std::string("-");
}

/// Resolved config plus a manifest of seeds, version and timing, both named
/// after `tag` so several commands can share one output directory.
void write_run_files(const ExperimentConfig& config, const std::string& tag, double wall_seconds,
                     const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    const fs::path out(config.out_dir);
    write_text_file(out / (tag + ".config"), dump_config(config));
    const MethodSetup setup = make_setup(config);
    std::ostringstream m;
    m << "command=" << tag << '\n'
      << "version=" << kVersion << '\n'
      << "config=" << tag << ".config\n"
      << "seed=" << config.seed << '\n'
      << "search_seed=" << setup.search.rng_seed << '\n'
      << "train_seed=" << setup.train.rng_seed << '\n'
      << "eval_seed=" << setup.eval.seed << '\n'
      << "threads=" << config.threads << '\n';
    for (const auto& [k, v] : extra) m << k << '=' << v << '\n';
    m << "wall_seconds=" << format_fixed(wall_seconds, 3) << '\n';
    write_text_file(out / (tag + ".manifest"), m.str());
}

Checkpoint initial_checkpoint(const ExperimentConfig& config, const ReasoningDomain& domain) {
    if (config.paths.checkpoint.empty()) {
        Checkpoint untrained;
        untrained.params = PolicyParams::zeros(domain.feature_dim());
        return untrained;
    }
    Checkpoint ckpt = load_checkpoint(config.paths.checkpoint);
    try {
        check_params(ckpt.params, domain.feature_dim());
    } catch (const std::invalid_argument& e) {
        throw FormatError(config.paths.checkpoint + ": " + e.what());
    }
    return ckpt;
}

void write_results(const fs::path& path, const std::vector<ResultRow>& rows) {
    std::ostringstream ss;
    write_results_csv(ss, rows);
    write_text_file(path, ss.str());
}

ResultRow make_row(std::string method, int iteration, std::string train_family, const EvalResult& e,
                   std::uint64_t seed) {
    ResultRow r;
    r.method = std::move(method);
    r.iteration = iteration;
    r.train_family = std::move(train_family);
    r.eval_family = std::string(family_name(e.family));
    r.accuracy = e.accuracy_mean;
    r.stderr_ = e.accuracy_stderr;
    r.num_runs = e.num_runs;
    r.num_problems = e.num_problems;
    r.seed = seed;
    return r;
}

int method_rank(const std::string& m) {
    static const std::vector<std::string> order = {"zero_shot", "rft", "step_dpo", "ours"};
    const auto it = std::find(order.begin(), order.end(), m);
    return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

MethodSetup make_setup(const ExperimentConfig& config) {
    MethodSetup s;
    s.search = config.search;
    s.search.rng_seed = derive_seed(config.seed, "search");
    s.scoring = config.scoring;
    s.train = config.train;
    s.train.rng_seed = derive_seed(config.seed, "train");
    s.eval = config.eval;
    s.eval.seed = derive_seed(config.seed, "eval");
    s.baseline = config.baseline;
    s.threads = config.threads;
    return s;
}

std::vector<Problem> build_eval_problems(const ExperimentConfig& config, Family family) {
    return generate_problems(family, static_cast<std::size_t>(config.data.eval_size), config.data.min_difficulty,
                             config.data.max_difficulty, derive_seed(config.seed, "eval-problems", family_tag(family)));
}

ProblemSets build_problem_sets(const ExperimentConfig& config, Family family) {
    ProblemSets sets;
    sets.eval = build_eval_problems(config, family);
    std::unordered_set<std::string> held_out;
    for (const auto& p : sets.eval) held_out.insert(p.text);

    if (!config.data.problems_file.empty()) {
        std::istringstream in(read_text_file(config.data.problems_file, "problem set"));
        for (auto& p : read_problems_jsonl(in))
            if (p.family == family && !held_out.count(p.text)) sets.pool.push_back(std::move(p));
        if (sets.pool.empty())
            throw std::invalid_argument("problem set " + config.data.problems_file + " has no family " +
                                        std::string(family_name(family)) + " problems outside the eval set");
        return sets;
    }

    // Problem i has its own stream, so a longer draw extends a shorter one.
    const auto want = static_cast<std::size_t>(config.data.pool_size);
    const std::uint64_t seed = derive_seed(config.seed, "pool", family_tag(family));
    for (std::size_t n = want; sets.pool.size() < want; n *= 2) {
        if (n > 16 * want)
            throw std::invalid_argument("cannot draw " + std::to_string(want) +
                                        " pool problems disjoint from the eval set");
        sets.pool.clear();
        for (auto& p : generate_problems(family, n, config.data.min_difficulty, config.data.max_difficulty, seed)) {
            if (held_out.count(p.text)) continue;
            sets.pool.push_back(std::move(p));
            if (sets.pool.size() == want) break;
        }
    }
    return sets;
}

std::vector<ResultRow> result_rows(const MethodRun& run, const ExperimentConfig& config) {
    std::vector<ResultRow> rows;
    const std::string name(method_name(run.method));
    if (run.method == Method::ZeroShot) {
        rows.push_back(make_row(name, 0, "-", run.initial_eval, config.seed));
        return rows;
    }
    const std::string fam(family_name(config.data.family));
    for (std::size_t i = 0; i < run.iterations.size(); ++i)
        rows.push_back(make_row(name, run.iterations[i], fam, run.evals[i], config.seed));
    return rows;
}

GenerateSummary cmd_generate(const ExperimentConfig& config) {
    const auto start = Clock::now();
    ArithmeticDomain domain;
    const MethodSetup setup = make_setup(config);
    const Checkpoint ckpt = initial_checkpoint(config, domain);
    const ProblemSets sets = build_problem_sets(config, config.data.family);

    ProblemSampler sampler(sets.pool.size(), derive_seed(setup.train.rng_seed, "sampler"));
    const auto count = std::min(sets.pool.size(), static_cast<std::size_t>(config.train.problems_per_iteration));
    std::vector<Problem> batch;
    for (std::size_t i : sampler.next(count)) batch.push_back(sets.pool[i]);

    SearchConfig search = setup.search;
    search.rng_seed = derive_seed(setup.search.rng_seed, "iteration", 1);
    GenerateSummary summary;
    const auto records = generate_dataset(batch, ckpt.params, domain, search, setup.scoring, config.threads,
                                          &summary.stats);

    const fs::path out(config.out_dir);
    summary.dataset_path = out / "dataset.jsonl";
    std::ostringstream ds;
    write_dataset_jsonl(ds, records);
    write_text_file(summary.dataset_path, ds.str());

    const auto& s = summary.stats;
    std::ostringstream st;
    st << "problems=" << s.problems << '\n'
       << "skipped_problems=" << s.skipped_problems << '\n'
       << "root_positions=" << s.root_positions << '\n'
       << "scored_steps=" << s.scored_steps << '\n'
       << "zero_filtered=" << s.zero_filtered << '\n'
       << "records=" << s.records << '\n';
    write_text_file(out / "generate_stats.txt", st.str());

    if (config.dump_trees) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            std::size_t position = 0;
            walk_reasoning_path(batch[i], i, ckpt.params, domain, search, setup.scoring, [&](const SearchTree& tree) {
                std::ostringstream ts;
                write_tree_jsonl(tree, ts);
                write_text_file(out / "trees" / ("p" + std::to_string(i) + "_pos" + std::to_string(position++) +
                                                 ".jsonl"),
                                ts.str());
            });
        }
    }
    write_run_files(config, "generate", seconds_since(start), {{"records", std::to_string(records.size())}});
    return summary;
}

Checkpoint cmd_train(const ExperimentConfig& config) {
    const auto start = Clock::now();
    ArithmeticDomain domain;
    if (config.paths.dataset.empty()) throw MissingArtifact("<paths.dataset unset>", "dataset");
    std::istringstream in(read_text_file(config.paths.dataset, "dataset"));
    const auto dataset = read_dataset_jsonl(in);
    if (dataset.empty()) throw std::invalid_argument("dataset " + config.paths.dataset + " is empty");
    const Checkpoint initial = initial_checkpoint(config, domain);

    const MethodSetup setup = make_setup(config);
    TrainConfig train = setup.train;
    train.rng_seed = derive_seed(setup.train.rng_seed, "train", static_cast<std::uint64_t>(initial.iteration + 1));
    TrainTrace trace;
    Checkpoint trained;
    trained.params = train_iteration(initial.params, dataset, domain, train, &trace);
    trained.method = "ours";
    trained.iteration = initial.iteration + 1;
    trained.family = config.data.family;

    const fs::path out(config.out_dir);
    save_checkpoint(out / "checkpoints" / "trained.ckpt", trained);
    std::ostringstream ls;
    ls << "epoch,loss\n0," << format_fixed(trace.initial_loss, 9) << '\n';
    for (std::size_t e = 0; e < trace.epoch_losses.size(); ++e)
        ls << e + 1 << ',' << format_fixed(trace.epoch_losses[e], 9) << '\n';
    write_text_file(out / "train_losses.csv", ls.str());
    write_run_files(config, "train", seconds_since(start),
                    {{"records", std::to_string(dataset.size())},
                     {"rejected_epochs", std::to_string(trace.rejected_epochs)}});
    return trained;
}

MethodRun cmd_baseline(const ExperimentConfig& config) {
    const auto start = Clock::now();
    ArithmeticDomain domain;
    const Method method = parse_method(config.method);
    const std::string name(method_name(method));
    const Checkpoint initial = initial_checkpoint(config, domain);
    const ProblemSets sets = build_problem_sets(config, config.data.family);
    const MethodRun run = run_method(method, initial.params, sets.pool, sets.eval, domain, make_setup(config));

    const fs::path out(config.out_dir);
    write_results(out / ("results_" + name + ".csv"), result_rows(run, config));

    std::ostringstream it;
    it << "method,iteration,dataset_size,accuracy,stderr\n";
    for (std::size_t i = 0; i < run.iterations.size(); ++i)
        it << name << ',' << run.iterations[i] << ',' << run.dataset_sizes[i] << ','
           << format_fixed(run.evals[i].accuracy_mean) << ',' << format_fixed(run.evals[i].accuracy_stderr) << '\n';
    write_text_file(out / ("iterations_" + name + ".csv"), it.str());

    const bool trained = method != Method::ZeroShot;
    for (std::size_t i = 0; i < run.params.size(); ++i) {
        Checkpoint c{run.params[i], name, run.iterations[i], trained ? std::optional(config.data.family) : std::nullopt};
        save_checkpoint(out / "checkpoints" / (name + "_iter" + std::to_string(run.iterations[i]) + ".ckpt"), c);
        if (i == run.best) save_checkpoint(out / "checkpoints" / (name + "_best.ckpt"), c);
    }
    write_run_files(config, method == Method::Ours ? "selftrain" : "baseline_" + name, seconds_since(start),
                    {{"method", name},
                     {"stop_reason", run.stop_reason},
                     {"iterations_run", std::to_string(run.iterations.size())}});
    return run;
}

MethodRun cmd_selftrain(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.method = "ours";
    return cmd_baseline(c);
}

EvalResult cmd_eval(const ExperimentConfig& config) {
    const auto start = Clock::now();
    ArithmeticDomain domain;
    const Checkpoint ckpt = initial_checkpoint(config, domain);
    const auto problems = build_eval_problems(config, config.data.family);
    const MethodSetup setup = make_setup(config);
    const EvalResult result = evaluate(ckpt.params, problems, domain, setup.eval, config.threads);
    const std::string method = config.paths.checkpoint.empty() ? "zero_shot" : ckpt.method;
    write_results(fs::path(config.out_dir) / "results_eval.csv",
                  {make_row(method, ckpt.iteration, train_family_label(ckpt.family), result, config.seed)});
    write_run_files(config, "eval", seconds_since(start));
    return result;
}

std::vector<ResultRow> cmd_transfer(const ExperimentConfig& config) {
    const auto start = Clock::now();
    ArithmeticDomain domain;
    const Family target = config.data.eval_family;
    const std::string wanted = "checkpoint trained on a family other than " + std::string(family_name(target));
    if (config.paths.checkpoint.empty()) throw MissingArtifact("<paths.checkpoint unset>", wanted);
    const Checkpoint ckpt = initial_checkpoint(config, domain);
    if (!ckpt.family || *ckpt.family == target) throw MissingArtifact(config.paths.checkpoint, wanted);

    const Family source = *ckpt.family;
    const MethodSetup setup = make_setup(config);
    const auto source_eval = build_eval_problems(config, source);
    const auto target_eval = build_eval_problems(config, target);
    const auto untrained = PolicyParams::zeros(domain.feature_dim());
    const std::string fam(family_name(source));

    std::vector<ResultRow> rows;
    rows.push_back(make_row("zero_shot", 0, "-", evaluate(untrained, source_eval, domain, setup.eval, config.threads),
                            config.seed));
    rows.push_back(make_row(ckpt.method, ckpt.iteration, fam,
                            evaluate(ckpt.params, source_eval, domain, setup.eval, config.threads), config.seed));
    rows.push_back(make_row("zero_shot", 0, "-", evaluate(untrained, target_eval, domain, setup.eval, config.threads),
                            config.seed));
    rows.push_back(make_row(ckpt.method, ckpt.iteration, fam,
                            transfer_eval(ckpt.params, source, target_eval, domain, setup.eval, config.threads),
                            config.seed));
    write_results(fs::path(config.out_dir) / "results_transfer.csv", rows);
    write_run_files(config, "transfer", seconds_since(start));
    return rows;
}

Report cmd_report(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name.rfind("results", 0) == 0 && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        }
    if (files.empty()) throw MissingArtifact(dir / "results_*.csv", "results CSV");
    std::sort(files.begin(), files.end());

    // (eval family) -> (method, train family) -> iteration -> row; first occurrence wins.
    using Key = std::pair<std::string, std::string>;
    std::map<std::string, std::map<Key, std::map<int, ResultRow>>> table;
    for (const auto& f : files) {
        std::istringstream in(read_text_file(f));
        try {
            for (auto& r : read_results_csv(in))
                table[r.eval_family][{r.method, r.train_family}].emplace(r.iteration, r);
        } catch (const FormatError& e) {
            throw FormatError(f.string() + ": " + e.what());
        }
    }

    Report report;
    std::ostringstream out;
    for (const auto& [eval_family, methods] : table) {
        std::set<int> iterations;
        for (const auto& [key, by_iter] : methods)
            for (const auto& [it, row] : by_iter) iterations.insert(it);

        std::vector<Key> keys;
        for (const auto& [key, by_iter] : methods) keys.push_back(key);
        std::stable_sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
            return std::pair(method_rank(a.first), a) < std::pair(method_rank(b.first), b);
        });

        auto label = [&](const Key& k) {
            if (k.second == "-" || k.second == eval_family) return k.first;
            return k.first + " (" + k.second + "->" + eval_family + ")";
        };
        std::vector<std::vector<std::string>> grid;
        std::vector<std::string> header = {"method"};
        for (int it : iterations) header.push_back("iter " + std::to_string(it));
        grid.push_back(header);
        for (const auto& k : keys) {
            std::vector<std::string> line = {label(k)};
            const auto& by_iter = methods.at(k);
            for (int it : iterations) {
                const auto found = by_iter.find(it);
                line.push_back(found == by_iter.end() ? "/"
                                                      : format_fixed(100.0 * found->second.accuracy, 2) + " +- " +
                                                            format_fixed(100.0 * found->second.stderr_, 2));
            }
            grid.push_back(line);
        }
        std::vector<std::size_t> width(header.size(), 0);
        for (const auto& line : grid)
            for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

        out << "eval family " << eval_family << " (accuracy %, mean +- stderr)\n";
        for (const auto& line : grid) {
            std::string text;
            for (std::size_t c = 0; c < line.size(); ++c) text += (c ? "  " : "") + pad(line[c], width[c]);
            while (!text.empty() && text.back() == ' ') text.pop_back();
            out << text << '\n';
        }
        out << '\n';

        for (const auto& k : keys) {
            std::string stem = "plot_" + k.first + "_" + eval_family;
            if (k.second != "-" && k.second != eval_family) stem += "_from" + k.second;
            const fs::path path = dir / (stem + ".dat");
            std::ostringstream dat;
            dat << "# iteration accuracy stderr\n";
            for (const auto& [it, row] : methods.at(k))
                dat << it << ' ' << format_fixed(row.accuracy) << ' ' << format_fixed(row.stderr_) << '\n';
            write_text_file(path, dat.str());
            report.plot_files.push_back(path);
        }
    }
    report.table = out.str();
    write_text_file(dir / "report.txt", report.table);
    return report;
}

int run_command(const std::string& name, const ExperimentConfig& config) {
    try {
        config.validate();
        if (name == "generate") {
            const auto s = cmd_generate(config);
            std::cout << "generate: " << s.stats.records << " records from " << s.stats.problems << " problems ("
                      << s.stats.zero_filtered << " zero-score steps filtered) -> " << s.dataset_path.string() << '\n';
        } else if (name == "train") {
            const auto c = cmd_train(config);
            std::cout << "train: wrote iteration " << c.iteration << " checkpoint to "
                      << (fs::path(config.out_dir) / "checkpoints" / "trained.ckpt").string() << '\n';
        } else if (name == "selftrain" || name == "baseline") {
            const auto run = name == "selftrain" ? cmd_selftrain(config) : cmd_baseline(config);
            for (const auto& r : result_rows(run, config))
                std::cout << r.method << " iter " << r.iteration << ": " << format_fixed(r.accuracy, 4) << " +- "
                          << format_fixed(r.stderr_, 4) << '\n';
            std::cout << "stop: " << run.stop_reason << '\n';
        } else if (name == "eval") {
            const auto e = cmd_eval(config);
            std::cout << "eval " << family_name(e.family) << ": " << format_fixed(e.accuracy_mean, 4) << " +- "
                      << format_fixed(e.accuracy_stderr, 4) << '\n';
        } else if (name == "transfer") {
            for (const auto& r : cmd_transfer(config))
                std::cout << r.method << " (train " << r.train_family << ") on " << r.eval_family << ": "
                          << format_fixed(r.accuracy, 4) << " +- " << format_fixed(r.stderr_, 4) << '\n';
        } else if (name == "report") {
            std::cout << cmd_report(config.out_dir).table;
        } else {
            throw ConfigError(ConfigError::Kind::Parse, "unknown command '" + name + "'");
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << '\n';
        return kExitMissingArtifact;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeFailure;
    }
}

}  // namespace stepmcts
