// Command-line entry point: stepmcts <command> [--config PATH] [--seed N] ...

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepmcts/config.hpp"
#include "stepmcts/experiment.hpp"

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<int> threads;
    std::vector<std::string> settings;
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--config", o.config_path, "key=value config file");
    cmd->add_option("--seed", o.seed, "top-level seed");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--method", o.method, "zero_shot, rft, step_dpo or ours");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--set", o.settings, "override one key (key=value); repeatable");
}

stepmcts::ExperimentConfig resolve(const Options& o) {
    using namespace stepmcts;
    ExperimentConfig c = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
    for (const auto& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(ConfigError::Kind::Parse, "--set expects key=value, got '" + s + "'");
        apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out_dir = *o.out;
    if (o.method) c.method = *o.method;
    if (o.threads) c.threads = *o.threads;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Step-level self-training with MCTS-scored data on a toy arithmetic domain"};
    app.require_subcommand(1);
    Options opts;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"generate", "write an MCTS-scored step dataset"},
        {"train", "train one iteration on a dataset"},
        {"selftrain", "run the iterative self-training loop"},
        {"baseline", "run zero_shot, rft or step_dpo (see --method)"},
        {"eval", "evaluate a checkpoint on held-out problems"},
        {"transfer", "evaluate a checkpoint on the other problem family"},
        {"report", "tabulate results CSVs in the output directory"},
    };
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? stepmcts::kExitOk : stepmcts::kExitConfigError;
    }

    stepmcts::ExperimentConfig config;
    try {
        config = resolve(opts);
    } catch (const stepmcts::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return stepmcts::kExitConfigError;
    }
    return stepmcts::run_command(app.get_subcommands().front()->get_name(), config);
}
