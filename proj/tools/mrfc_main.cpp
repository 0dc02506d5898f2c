// Command-line surface for the Markov-network classification toolkit.
//
// Commands: train, predict, eval, bench, synth. Each command reads one
// section of an INI-style config file (key = value), with --set overrides
// taking precedence and one mandatory top-level seed fanning out to every
// random stream.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mrfc/data.hpp"
#include "mrfc/eval.hpp"
#include "mrfc/inference.hpp"
#include "mrfc/model.hpp"
#include "mrfc/rng.hpp"
#include "mrfc/training.hpp"

namespace fs = std::filesystem;
using namespace mrfc;

namespace {

using Section = std::map<std::string, std::string>;
using IniConfig = std::map<std::string, Section>;

const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"train",
         {"seed", "out", "data", "bins", "objective", "regularizer", "lambda", "l1_ratio",
          "step_size", "max_iters", "grad_tol", "weights", "structure", "m", "prune_eps",
          "structure_lambda", "exact_limit"}},
        {"predict",
         {"seed", "out", "model", "bins", "data", "method", "gibbs_burn_in", "gibbs_samples",
          "gibbs_thin", "mf_tol", "mf_max_iters", "mf_damping"}},
        {"eval", {"seed", "out", "scores", "labels", "labels_csv", "threshold"}},
        {"bench",
         {"seed", "out", "data", "n", "d", "minority_ratio", "planted", "noise", "ratios",
          "models", "seeds", "method", "bins", "test_frac", "threshold", "baseline_l2",
          "timings", "objective", "regularizer", "lambda", "l1_ratio", "step_size", "max_iters",
          "grad_tol", "weights", "structure", "m", "prune_eps", "structure_lambda"}},
        {"synth", {"seed", "out", "n", "d", "minority_ratio", "planted", "noise"}},
    };
    return schema;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

IniConfig parse_ini(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    IniConfig config;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = trim(t.substr(1, t.size() - 2));
            if (!config_schema().count(section)) {
                throw ConfigError("unknown config section [" + section + "] at line " +
                                  std::to_string(lineno));
            }
            config[section];
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("expected key = value at line " + std::to_string(lineno));
        }
        if (section.empty()) {
            throw ConfigError("key outside a [section] at line " + std::to_string(lineno));
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (!config_schema().at(section).count(key)) {
            throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
        }
        if (config[section].count(key)) {
            throw ConfigError("duplicate key '" + key + "' in section [" + section + "]");
        }
        config[section][key] = value;
    }
    return config;
}

std::string get_str(const Section& s, const std::string& key, const std::string& fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : it->second;
}

std::string require_str(const Section& s, const std::string& key) {
    auto it = s.find(key);
    if (it == s.end() || it->second.empty()) {
        throw ConfigError("missing required config key '" + key + "'");
    }
    return it->second;
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not a number: " + v);
    }
}

long long to_int(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "' is not an integer: " + v);
    }
}

double get_double(const Section& s, const std::string& key, double fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : to_double(it->second, key);
}

long long get_int(const Section& s, const std::string& key, long long fallback) {
    auto it = s.find(key);
    return it == s.end() ? fallback : to_int(it->second, key);
}

bool get_bool(const Section& s, const std::string& key, bool fallback) {
    auto it = s.find(key);
    if (it == s.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key '" + key + "' must be true or false");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

Objective parse_objective(const std::string& v) {
    if (v == "exact_ll") return Objective::exact_ll;
    if (v == "pseudo_ll") return Objective::pseudo_ll;
    throw ConfigError("objective must be exact_ll or pseudo_ll, got '" + v + "'");
}

Regularizer parse_regularizer(const std::string& v) {
    if (v == "none") return Regularizer::none;
    if (v == "l2") return Regularizer::l2;
    if (v == "l1") return Regularizer::l1;
    if (v == "elastic") return Regularizer::elastic;
    throw ConfigError("regularizer must be none, l2, l1 or elastic, got '" + v + "'");
}

WeightScheme parse_weights(const std::string& v) {
    if (v == "none") return WeightScheme::none;
    if (v == "inverse_frequency") return WeightScheme::inverse_frequency;
    if (v == "custom") {
        throw ConfigError("weight scheme 'custom' is not available from the CLI");
    }
    throw ConfigError("weights must be none or inverse_frequency, got '" + v + "'");
}

InferMethod parse_method(const std::string& v) {
    if (v == "exact") return InferMethod::exact;
    if (v == "gibbs") return InferMethod::gibbs;
    if (v == "meanfield") return InferMethod::meanfield;
    throw ConfigError("method must be exact, gibbs or meanfield, got '" + v + "'");
}

Planted parse_planted(const std::string& v) {
    if (v == "none") return Planted::none;
    if (v == "xor_pair") return Planted::xor_pair;
    if (v == "pairwise") return Planted::pairwise;
    throw ConfigError("planted must be none, xor_pair or pairwise, got '" + v + "'");
}

TrainConfig train_config_from(const Section& s) {
    TrainConfig cfg;
    cfg.objective = parse_objective(get_str(s, "objective", "pseudo_ll"));
    cfg.regularizer = parse_regularizer(get_str(s, "regularizer", "l2"));
    cfg.lambda = get_double(s, "lambda", 1.0);
    cfg.l1_ratio = get_double(s, "l1_ratio", 0.5);
    cfg.step_size = get_double(s, "step_size", 1.0);
    cfg.max_iters = static_cast<int>(get_int(s, "max_iters", 200));
    cfg.grad_tol = get_double(s, "grad_tol", 1e-5);
    cfg.weight_scheme = parse_weights(get_str(s, "weights", "inverse_frequency"));
    cfg.validate();
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------- commands

int run_train(const Section& s, std::uint64_t seed, const std::string& out_dir) {
    (void)seed;  // training is deterministic; the seed is required for uniformity
    RawDataset raw = load_csv(require_str(s, "data"));
    if (raw.size() == 0) throw Error("training data has no rows");
    int bins = static_cast<int>(get_int(s, "bins", 5));
    BinningSpec spec = fit_bins(raw, bins);
    DiscretizedDataset ds = apply_bins(raw, spec);

    TrainConfig cfg = train_config_from(s);

    std::string structure_mode = get_str(s, "structure", "star");
    GraphStructure structure;
    if (structure_mode == "star") {
        structure = star_structure(ds);
    } else if (structure_mode == "learn") {
        StructureOptions opts;
        opts.m = static_cast<int>(get_int(s, "m", -1));
        opts.prune_eps = get_double(s, "prune_eps", 1e-3);
        TrainConfig struct_cfg = cfg;
        struct_cfg.regularizer = Regularizer::l1;
        struct_cfg.lambda =
            get_double(s, "structure_lambda", std::sqrt(static_cast<double>(ds.size())));
        structure = learn_structure(ds, struct_cfg, opts).structure;
    } else {
        throw ConfigError("structure must be star or learn, got '" + structure_mode + "'");
    }

    FitResult result = fit(MarkovNetwork::zeros(structure), ds, cfg);

    write_file(out_path(out_dir, "model.json"), serialize_model(result.network));
    write_file(out_path(out_dir, "bins.json"), serialize_bins(spec));
    std::string trace;
    for (const auto& e : result.trace.entries) {
        trace += std::to_string(e.iter) + " " + fmt17(e.objective) + " " +
                 fmt17(e.grad_max_norm) + " " + (e.accepted ? "1" : "0") + "\n";
    }
    write_file(out_path(out_dir, "trace.txt"), trace);
    std::cout << "trained " << ds.size() << " rows, " << structure.edges.size() << " edges, "
              << result.trace.entries.size() << " iterations\n";
    return 0;
}

int run_predict(const Section& s, std::uint64_t seed, const std::string& out_dir) {
    MarkovNetwork model = deserialize_model(read_file(require_str(s, "model")));
    BinningSpec bins = deserialize_bins(read_file(require_str(s, "bins")));
    RawDataset input = load_feature_csv(require_str(s, "data"));

    // resolve input columns against the training features by name
    if (input.size() > 0) {
        std::vector<int> col_of(bins.feature_names.size(), -1);
        for (std::size_t j = 0; j < bins.feature_names.size(); ++j) {
            for (std::size_t k = 0; k < input.feature_names.size(); ++k) {
                if (input.feature_names[k] == bins.feature_names[j]) col_of[j] = static_cast<int>(k);
            }
            if (col_of[j] < 0) {
                throw SchemaError("input is missing training feature: " + bins.feature_names[j]);
            }
        }
        RawDataset ordered;
        ordered.feature_names = bins.feature_names;
        ordered.labels = input.labels;
        ordered.features.resize(input.size());
        for (std::size_t i = 0; i < input.size(); ++i) {
            ordered.features[i].resize(col_of.size());
            for (std::size_t j = 0; j < col_of.size(); ++j) {
                ordered.features[i][j] = input.features[i][static_cast<std::size_t>(col_of[j])];
            }
        }
        input = std::move(ordered);
    }

    PredictConfig pc;
    pc.method = parse_method(get_str(s, "method", "exact"));
    pc.gibbs.burn_in = static_cast<int>(get_int(s, "gibbs_burn_in", 1000));
    pc.gibbs.samples = static_cast<int>(get_int(s, "gibbs_samples", 5000));
    pc.gibbs.thin = static_cast<int>(get_int(s, "gibbs_thin", 1));
    pc.meanfield.tol = get_double(s, "mf_tol", 1e-6);
    pc.meanfield.max_iters = static_cast<int>(get_int(s, "mf_max_iters", 500));
    pc.meanfield.damping = get_double(s, "mf_damping", 0.0);

    std::string scores;
    if (input.size() > 0) {
        DiscretizedDataset ds = apply_bins(input, bins);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            EvidenceMap ev;
            for (std::size_t j = 0; j < ds.dim(); ++j) {
                ev[static_cast<int>(j) + 1] = ds.instances[i][j];
            }
            pc.gibbs.seed = derive_seed(seed, 100 + i);
            scores += fmt17(predict_label(model, ev, pc)[1]);
            scores += "\n";
        }
    }
    write_file(out_path(out_dir, "scores.txt"), scores);
    std::cout << "scored " << input.size() << " rows\n";
    return 0;
}

int run_eval(const Section& s, std::uint64_t seed, const std::string& out_dir) {
    (void)seed;
    ScoredPredictions preds;
    {
        std::ifstream in(require_str(s, "scores"));
        if (!in) throw Error("cannot open file: " + get_str(s, "scores", ""));
        std::string line;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (t.empty()) continue;
            preds.scores.push_back(to_double(t, "scores"));
        }
    }
    if (s.count("labels_csv")) {
        preds.labels = load_csv(s.at("labels_csv")).labels;
    } else {
        std::ifstream in(require_str(s, "labels"));
        if (!in) throw Error("cannot open file: " + get_str(s, "labels", ""));
        std::string line;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (t.empty()) continue;
            preds.labels.push_back(static_cast<int>(to_int(t, "labels")));
        }
    }
    if (preds.scores.size() != preds.labels.size()) {
        throw SchemaError("score count " + std::to_string(preds.scores.size()) +
                          " does not match label count " + std::to_string(preds.labels.size()));
    }

    MetricsReport report = evaluate_predictions(preds, get_double(s, "threshold", 0.5));
    write_file(out_path(out_dir, "metrics.txt"), render_metrics_text(report));
    write_file(out_path(out_dir, "metrics.json"), render_metrics_json(report));
    std::cout << render_metrics_text(report);
    return 0;
}

int run_bench(const Section& s, std::uint64_t seed, const std::string& out_dir) {
    BenchSpec spec;
    spec.csv_path = get_str(s, "data", "");
    spec.synth.n = static_cast<int>(get_int(s, "n", 5000));
    spec.synth.d = static_cast<int>(get_int(s, "d", 10));
    spec.synth.minority_ratio = get_double(s, "minority_ratio", 0.1);
    spec.synth.planted = parse_planted(get_str(s, "planted", "xor_pair"));
    spec.synth.noise = get_double(s, "noise", 0.1);
    for (const std::string& r : split_list(get_str(s, "ratios", ""))) {
        spec.ratios.push_back(to_double(r, "ratios"));
    }
    if (s.count("models")) {
        spec.models.clear();
        for (const std::string& m : split_list(s.at("models"))) {
            spec.models.push_back(parse_bench_model(m));
        }
        if (spec.models.empty()) throw ConfigError("models list is empty");
    }
    spec.seeds.clear();
    if (s.count("seeds")) {
        for (const std::string& v : split_list(s.at("seeds"))) {
            spec.seeds.push_back(static_cast<std::uint64_t>(to_int(v, "seeds")));
        }
    }
    if (spec.seeds.empty()) spec.seeds.push_back(seed);
    spec.method = parse_method(get_str(s, "method", "exact"));
    spec.train = train_config_from(s);
    spec.structure_lambda = get_double(s, "structure_lambda", -1.0);
    std::string structure_mode = get_str(s, "structure", "learn");
    if (structure_mode == "star") {
        spec.learn_edges = false;
    } else if (structure_mode == "learn") {
        spec.learn_edges = true;
        spec.structure.m = static_cast<int>(get_int(s, "m", -1));
        spec.structure.prune_eps = get_double(s, "prune_eps", 1e-3);
    } else {
        throw ConfigError("structure must be star or learn, got '" + structure_mode + "'");
    }
    spec.bins = static_cast<int>(get_int(s, "bins", 5));
    spec.test_frac = get_double(s, "test_frac", 0.3);
    spec.threshold = get_double(s, "threshold", 0.5);
    spec.baseline_l2 = get_double(s, "baseline_l2", 1e-3);
    spec.timings = get_bool(s, "timings", false);

    BenchResult result = run_benchmark(spec);
    write_file(out_path(out_dir, "report.txt"), render_bench_table(result));
    write_file(out_path(out_dir, "report.jsonl"), render_bench_records(result));
    std::cout << render_bench_table(result);
    return 0;
}

int run_synth(const Section& s, std::uint64_t seed, const std::string& out_dir) {
    SyntheticConfig cfg;
    cfg.n = static_cast<int>(get_int(s, "n", 1000));
    cfg.d = static_cast<int>(get_int(s, "d", 10));
    cfg.minority_ratio = get_double(s, "minority_ratio", 0.1);
    cfg.planted = parse_planted(get_str(s, "planted", "none"));
    cfg.noise = get_double(s, "noise", 0.0);
    cfg.seed = derive_seed(seed, 0);
    RawDataset data = generate_synthetic(cfg);
    write_csv(out_path(out_dir, "data.csv"), data);
    std::cout << "wrote " << data.size() << " rows\n";
    return 0;
}

int dispatch(const std::string& command, const Section& section, std::uint64_t seed,
             const std::string& out_dir) {
    if (command == "train") return run_train(section, seed, out_dir);
    if (command == "predict") return run_predict(section, seed, out_dir);
    if (command == "eval") return run_eval(section, seed, out_dir);
    if (command == "bench") return run_bench(section, seed, out_dir);
    if (command == "synth") return run_synth(section, seed, out_dir);
    throw ConfigError("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete pairwise Markov-network classifier for imbalanced tabular data"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::int64_t> seed_flag;
    std::vector<std::string> overrides;

    const char* names[] = {"train", "predict", "eval", "bench", "synth"};
    const char* descs[] = {"fit a model and write model/bins/trace files",
                           "score rows with a trained model",
                           "compute metrics from a score file and truth labels",
                           "run the model-comparison benchmark",
                           "generate a synthetic dataset"};
    for (int i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", config_path, "INI config file");
        sub->add_option("--seed", seed_flag, "top-level seed (required here or in the config)");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--set", overrides, "override: key=value in this command's section");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << e.what() << "\n";
        return 2;
    }

    std::string command = app.get_subcommands().front()->get_name();

    try {
        IniConfig config;
        if (!config_path.empty()) config = parse_ini(config_path);
        Section section = config.count(command) ? config[command] : Section{};
        for (const std::string& ov : overrides) {
            std::size_t eq = ov.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + ov);
            std::string key = trim(ov.substr(0, eq));
            if (!config_schema().at(command).count(key)) {
                throw ConfigError("unknown key '" + key + "' for command " + command);
            }
            section[key] = trim(ov.substr(eq + 1));
        }

        std::uint64_t seed;
        if (seed_flag) {
            seed = static_cast<std::uint64_t>(*seed_flag);
        } else if (section.count("seed")) {
            seed = static_cast<std::uint64_t>(to_int(section.at("seed"), "seed"));
        } else {
            throw ConfigError("a seed is required (pass --seed or set 'seed' in the config)");
        }
        if (!section.count("out") && out_dir.empty()) {
            throw ConfigError("output directory must not be empty");
        }
        if (section.count("out") && out_dir == ".") out_dir = section.at("out");

        return dispatch(command, section, seed, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergedError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const TooLargeError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
