#include "stepmcts/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stepmcts {

using nlohmann::ordered_json;

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

template <typename T>
T field_number(const std::string& s, const char* what) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
        throw FormatError(std::string("bad ") + what + " value '" + s + "'");
    return v;
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("line " + std::to_string(n) + ": " + e.what());
        }
    }
}

}  // namespace

void write_problems_jsonl(std::ostream& out, std::span<const Problem> problems) {
    for (const auto& p : problems) {
        ordered_json j;
        j["text"] = p.text;
        j["answer"] = p.answer;
        j["family"] = std::string(family_name(p.family));
        j["difficulty"] = p.difficulty;
        out << j.dump() << '\n';
    }
}

std::vector<Problem> read_problems_jsonl(std::istream& in) {
    std::vector<Problem> out;
    for_each_json_line(in, [&](const nlohmann::json& j) {
        Problem p;
        p.text = j.at("text").get<std::string>();
        p.answer = j.at("answer").get<std::int64_t>();
        try {
            p.family = parse_family(j.at("family").get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
        p.difficulty = j.at("difficulty").get<int>();
        out.push_back(std::move(p));
    });
    return out;
}

void write_dataset_jsonl(std::ostream& out, std::span<const TrainingExample> records) {
    for (const auto& r : records) {
        ordered_json j;
        j["problem"] = r.problem;
        j["partial"] = r.partial;
        j["step"] = r.step;
        j["score"] = r.score;
        out << j.dump() << '\n';
    }
}

std::vector<TrainingExample> read_dataset_jsonl(std::istream& in) {
    std::vector<TrainingExample> out;
    for_each_json_line(in, [&](const nlohmann::json& j) {
        TrainingExample r;
        r.problem = j.at("problem").get<std::string>();
        r.partial = j.at("partial").get<Partial>();
        r.step = j.at("step").get<std::string>();
        r.score = j.at("score").get<double>();
        out.push_back(std::move(r));
    });
    return out;
}

std::string join_steps(std::span<const std::string> steps) {
    std::string out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i) out += "\n\n";
        out += steps[i];
    }
    return out;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
    out << "stepmcts-checkpoint " << kCheckpointVersion << '\n';
    out << "dim " << ckpt.params.weights.size() << '\n';
    out << "method " << ckpt.method << '\n';
    out << "iteration " << ckpt.iteration << '\n';
    out << "family " << (ckpt.family ? std::string(family_name(*ckpt.family)) : std::string("-")) << '\n';
    for (double w : ckpt.params.weights) out << "w " << shortest(w) << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
    auto expect = [&](const char* key) {
        std::string line;
        if (!std::getline(in, line)) throw FormatError(std::string("checkpoint: missing '") + key + "' line");
        const std::string prefix = std::string(key) + " ";
        if (line.rfind(prefix, 0) != 0) throw FormatError("checkpoint: expected '" + prefix + "', got '" + line + "'");
        return line.substr(prefix.size());
    };
    const int version = field_number<int>(expect("stepmcts-checkpoint"), "version");
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto dim = field_number<std::size_t>(expect("dim"), "dim");
    Checkpoint ckpt;
    ckpt.method = expect("method");
    ckpt.iteration = field_number<int>(expect("iteration"), "iteration");
    const std::string fam = expect("family");
    if (fam != "-") {
        try {
            ckpt.family = parse_family(fam);
        } catch (const std::invalid_argument& e) {
            throw FormatError(e.what());
        }
    }
    ckpt.params.weights.reserve(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        const double w = field_number<double>(expect("w"), "weight");
        if (!std::isfinite(w)) throw FormatError("checkpoint: non-finite weight");
        ckpt.params.weights.push_back(w);
    }
    std::string rest;
    while (std::getline(in, rest))
        if (!rest.empty()) throw FormatError("checkpoint: more weights than dim " + std::to_string(dim));
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ostringstream ss;
    write_checkpoint(ss, ckpt);
    write_text_file(path, ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path, "checkpoint"));
    return read_checkpoint(in);
}

std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_results_csv(std::ostream& out, std::span<const ResultRow> rows) {
    out << kResultsHeader << '\n';
    for (const auto& r : rows) {
        out << r.method << ',' << r.iteration << ',' << r.train_family << ',' << r.eval_family << ','
            << format_fixed(r.accuracy) << ',' << format_fixed(r.stderr_) << ',' << r.num_runs << ','
            << r.num_problems << ',' << r.seed << '\n';
    }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("results csv: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsHeader) throw FormatError("results csv: unexpected header '" + line + "'");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != 9) throw FormatError("results csv: expected 9 fields in '" + line + "'");
        ResultRow r;
        r.method = f[0];
        r.iteration = field_number<int>(f[1], "iteration");
        r.train_family = f[2];
        r.eval_family = f[3];
        r.accuracy = field_number<double>(f[4], "accuracy");
        r.stderr_ = field_number<double>(f[5], "stderr");
        r.num_runs = field_number<int>(f[6], "num_runs");
        r.num_problems = field_number<int>(f[7], "num_problems");
        r.seed = field_number<std::uint64_t>(f[8], "seed");
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact(path, what);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace stepmcts
