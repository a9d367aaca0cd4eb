// Python surface over the C++ core. Policies cross the boundary as plain
// lists of weights; problems, records and results as small value classes.
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "stepmcts/baselines.hpp"
#include "stepmcts/config.hpp"
#include "stepmcts/evaluation.hpp"
#include "stepmcts/experiment.hpp"
#include "stepmcts/io.hpp"
#include "stepmcts/search_tree.hpp"
#include "stepmcts/step_scoring.hpp"
#include "stepmcts/toy_domain.hpp"
#include "stepmcts/trainer.hpp"

namespace py = pybind11;
using namespace stepmcts;

namespace {

const ArithmeticDomain& domain() {
    static const ArithmeticDomain d;
    return d;
}

PolicyParams params_of(const std::vector<double>& weights) {
    PolicyParams p{weights};
    check_params(p, domain().feature_dim());
    return p;
}

SearchConfig search_config(int num_simulations, double ucb_c, int max_children, std::uint64_t seed) {
    SearchConfig cfg;
    cfg.num_simulations = num_simulations;
    cfg.ucb_c = ucb_c;
    cfg.max_children = max_children;
    cfg.rng_seed = seed;
    cfg.validate();
    return cfg;
}

py::dict search_summary(const SearchTree& tree) {
    py::list nodes;
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& n = tree.node(id);
        py::dict d;
        d["id"] = id;
        d["parent_id"] = n.parent ? py::object(py::int_(*n.parent)) : py::object(py::none());
        d["step"] = n.step;
        d["n"] = n.visit_count;
        d["q"] = n.cumulative_reward;
        d["terminal"] = n.is_terminal;
        nodes.append(std::move(d));
    }
    py::list children;
    for (NodeId c : tree.node(0).children) {
        const auto& n = tree.node(c);
        children.append(py::make_tuple(n.step, n.cumulative_reward, n.visit_count));
    }
    py::dict out;
    out["nodes"] = nodes;
    out["root_children"] = children;
    std::ostringstream jsonl;
    write_tree_jsonl(tree, jsonl);
    out["jsonl"] = jsonl.str();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MCTS step scoring and self-training on a toy arithmetic domain";
    m.attr("__version__") = std::string(kVersion);
    m.attr("FEATURE_DIM") = static_cast<std::size_t>(ArithmeticDomain::kFeatureDim);

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<MissingArtifact>(m, "MissingArtifact", PyExc_FileNotFoundError);

    py::enum_<Family>(m, "Family").value("A", Family::A).value("B", Family::B);

    py::class_<Problem>(m, "Problem")
        .def(py::init([](std::string text, std::int64_t answer, Family family, int difficulty) {
                 return Problem{std::move(text), answer, family, difficulty};
             }),
             py::arg("text"), py::arg("answer"), py::arg("family") = Family::A, py::arg("difficulty") = 0)
        .def_readwrite("text", &Problem::text)
        .def_readwrite("answer", &Problem::answer)
        .def_readwrite("family", &Problem::family)
        .def_readwrite("difficulty", &Problem::difficulty)
        .def(py::self == py::self)
        .def("__repr__", [](const Problem& p) { return "Problem('" + p.text + "', " + std::to_string(p.answer) + ")"; });

    py::class_<TrainingExample>(m, "TrainingExample")
        .def(py::init([](std::string problem, Partial partial, std::string step, double score) {
                 return TrainingExample{std::move(problem), std::move(partial), std::move(step), score};
             }),
             py::arg("problem"), py::arg("partial"), py::arg("step"), py::arg("score"))
        .def_readwrite("problem", &TrainingExample::problem)
        .def_readwrite("partial", &TrainingExample::partial)
        .def_readwrite("step", &TrainingExample::step)
        .def_readwrite("score", &TrainingExample::score)
        .def(py::self == py::self);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("accuracy_mean", &EvalResult::accuracy_mean)
        .def_readonly("accuracy_stderr", &EvalResult::accuracy_stderr)
        .def_readonly("stderr_defined", &EvalResult::stderr_defined)
        .def_readonly("num_runs", &EvalResult::num_runs)
        .def_readonly("num_problems", &EvalResult::num_problems)
        .def_readonly("family", &EvalResult::family)
        .def_readonly("run_accuracies", &EvalResult::run_accuracies);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def(py::init([](std::vector<double> weights, std::string method, int iteration, std::optional<Family> family) {
                 return Checkpoint{PolicyParams{std::move(weights)}, std::move(method), iteration, family};
             }),
             py::arg("weights"), py::arg("method") = "initial", py::arg("iteration") = 0,
             py::arg("family") = py::none())
        .def_property(
            "weights", [](const Checkpoint& c) { return c.params.weights; },
            [](Checkpoint& c, std::vector<double> w) { c.params.weights = std::move(w); })
        .def_readwrite("method", &Checkpoint::method)
        .def_readwrite("iteration", &Checkpoint::iteration)
        .def_readwrite("family", &Checkpoint::family)
        .def(py::self == py::self);

    py::class_<ArithmeticDomain>(m, "ArithmeticDomain")
        .def(py::init<>())
        .def("feature_dim", &ArithmeticDomain::feature_dim)
        .def(
            "step_options",
            [](const ArithmeticDomain& d, const std::string& text, const Partial& partial) {
                py::list out;
                for (auto& o : d.step_options(text, partial)) out.append(py::make_tuple(o.text, o.features, o.is_final));
                return out;
            },
            py::arg("problem_text"), py::arg("partial") = Partial{},
            "Candidate next steps as (text, features, is_final) tuples.")
        .def("running_expression",
             [](const ArithmeticDomain& d, const std::string& text, const Partial& partial) {
                 return d.running_expression(text, partial);
             })
        .def("is_final_step", &ArithmeticDomain::is_final_step)
        .def("verify_answer", &ArithmeticDomain::verify_answer);

    m.def("generate_problems", &generate_problems, py::arg("family"), py::arg("count"),
          py::arg("min_difficulty") = 2, py::arg("max_difficulty") = 5, py::arg("seed") = 0);

    m.def("zeros", [] { return PolicyParams::zeros(domain().feature_dim()).weights; },
          "Untrained policy weights.");

    m.def(
        "ucb_value",
        [](double q, int n, int parent_visits, double c) {
            MctsNode node;
            node.cumulative_reward = q;
            node.visit_count = n;
            return ucb_value(node, parent_visits, c);
        },
        py::arg("q"), py::arg("n"), py::arg("parent_visits"), py::arg("c"));

    m.def(
        "score_children",
        [](const std::vector<std::pair<double, int>>& stats, double alpha) {
            std::vector<ChildStats> cs;
            for (auto [q, n] : stats) cs.push_back({q, n});
            return score_children(cs, alpha);
        },
        py::arg("stats"), py::arg("alpha") = 1.0, "Relative scores for sibling (Q, N) pairs.");

    m.def(
        "run_search",
        [](const Problem& problem, const Partial& partial, const std::vector<double>& weights, int num_simulations,
           double ucb_c, int max_children, std::uint64_t seed) {
            const auto tree = run_search(problem, partial, params_of(weights), domain(),
                                         search_config(num_simulations, ucb_c, max_children, seed));
            return search_summary(tree);
        },
        py::arg("problem"), py::arg("partial") = Partial{}, py::arg("weights"), py::arg("num_simulations") = 32,
        py::arg("ucb_c") = 1.414, py::arg("max_children") = 5, py::arg("seed") = 0);

    m.def(
        "generate_dataset",
        [](const std::vector<Problem>& problems, const std::vector<double>& weights, int num_simulations,
           double alpha, std::uint64_t seed, int threads) {
            ScoringConfig scoring;
            scoring.alpha = alpha;
            scoring.validate();
            py::gil_scoped_release release;
            return generate_dataset(problems, params_of(weights), domain(),
                                    search_config(num_simulations, 1.414, 5, seed), scoring, threads);
        },
        py::arg("problems"), py::arg("weights"), py::arg("num_simulations") = 32, py::arg("alpha") = 1.0,
        py::arg("seed") = 0, py::arg("threads") = 1);

    m.def(
        "weighted_nll_kl_loss",
        [](const std::vector<double>& w, const std::vector<double>& w_prev, const std::vector<TrainingExample>& batch,
           double kl_weight) { return loss(params_of(w), params_of(w_prev), batch, domain(), kl_weight); },
        py::arg("weights"), py::arg("prev_weights"), py::arg("batch"), py::arg("kl_weight") = 1.0);

    m.def(
        "weighted_nll_kl_grad",
        [](const std::vector<double>& w, const std::vector<double>& w_prev, const std::vector<TrainingExample>& batch,
           double kl_weight) { return grad(params_of(w), params_of(w_prev), batch, domain(), kl_weight); },
        py::arg("weights"), py::arg("prev_weights"), py::arg("batch"), py::arg("kl_weight") = 1.0);

    m.def(
        "train_iteration",
        [](const std::vector<double>& w_prev, const std::vector<TrainingExample>& dataset, double learning_rate,
           int epochs, int batch_size, double kl_weight, std::uint64_t seed) {
            TrainConfig cfg;
            cfg.learning_rate = learning_rate;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.kl_weight = kl_weight;
            cfg.rng_seed = seed;
            cfg.validate();
            return train_iteration(params_of(w_prev), dataset, domain(), cfg).weights;
        },
        py::arg("prev_weights"), py::arg("dataset"), py::arg("learning_rate") = 1.0, py::arg("epochs") = 4,
        py::arg("batch_size") = 32, py::arg("kl_weight") = 1.0, py::arg("seed") = 0);

    m.def(
        "dpo_loss",
        [](const std::vector<double>& w, const std::vector<double>& w_ref,
           const std::vector<std::tuple<std::string, Partial, std::string, std::string>>& pairs, double beta) {
            std::vector<PreferencePair> ps;
            for (const auto& [x, p, c, r] : pairs) ps.push_back({x, p, c, r});
            return dpo_loss(params_of(w), params_of(w_ref), ps, domain(), beta);
        },
        py::arg("weights"), py::arg("ref_weights"), py::arg("pairs"), py::arg("beta") = 0.1,
        "Pairs are (problem, partial, chosen, rejected) tuples.");

    m.def(
        "evaluate",
        [](const std::vector<double>& w, const std::vector<Problem>& problems, int num_runs, double temperature,
           std::uint64_t seed, int threads) {
            EvalConfig cfg;
            cfg.num_runs = num_runs;
            cfg.temperature = temperature;
            cfg.seed = seed;
            cfg.validate();
            const auto params = params_of(w);
            py::gil_scoped_release release;
            return evaluate(params, problems, domain(), cfg, threads);
        },
        py::arg("weights"), py::arg("problems"), py::arg("num_runs") = 4, py::arg("temperature") = 0.7,
        py::arg("seed") = 0, py::arg("threads") = 1);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def("set", [](ExperimentConfig& c, const std::string& key,
                       const std::string& value) { apply_setting(c, key, value); })
        .def("validate", &ExperimentConfig::validate)
        .def("dump", [](const ExperimentConfig& c) { return dump_config(c); });

    m.def("parse_config", [](const std::string& text) { return parse_config(text); }, py::arg("text"));
    m.def("load_config", &load_config, py::arg("path"));
    m.def("dump_config", &dump_config, py::arg("config"));
    m.def("config_keys", &config_keys);

    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("checkpoint"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "run_command",
        [](const std::string& name, const ExperimentConfig& config) {
            py::gil_scoped_release release;
            return run_command(name, config);
        },
        py::arg("name"), py::arg("config"), "Runs a CLI command in-process and returns its exit code.");
}
