#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "reid/cycle.hpp"
#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/eval.hpp"
#include "reid/feature.hpp"
#include "reid/metric.hpp"
#include "reid/rng.hpp"
#include "reid/synth.hpp"

namespace reid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPipeline = 1;
inline constexpr int kExitUsage = 2;

/// Every setting reachable from flags or a config file.
struct Settings {
    std::string data;
    std::string out;
    std::string features_file;
    std::uint64_t seed = 0;
    std::size_t trials = 10;
    std::size_t frames = 4;
    std::string strategy = "representative";
    std::string pooling = "max";
    std::size_t pca_dim = 100;
    std::string metric = "kissme";
    std::string measure = "avg";
    // fep / cycles / pool
    std::string seq;
    std::string groups;
    // sweep
    std::string axis;
    std::string values;
    // synth
    std::size_t identities = 20;
    std::size_t length = 64;
    std::size_t period = 24;
    double noise = 0.1;
    int width = 48;
    int height = 96;
};

/// Thrown for malformed command lines and config files; exits 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFound("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("IoError", "cannot write " + p.string());
    out << text;
    if (!out) throw Error("IoError", "failed writing " + p.string());
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    std::istringstream ss(v);
    ss >> out;
    if (!ss || !ss.eof()) throw UsageError("config key '" + key + "': bad value '" + v + "'");
    return out;
}

}  // namespace detail

/// Reads flat `key = value` lines (# comments, blank lines ignored). Keys
/// may use '-' or '_'. Unknown keys are usage errors.
inline void apply_config(const std::string& text, Settings& s) {
    std::istringstream in(text);
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = reid::detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("config line " + std::to_string(no) + ": expected key = value");
        std::string key = reid::detail::trim(line.substr(0, eq));
        const std::string v = reid::detail::trim(line.substr(eq + 1));
        std::replace(key.begin(), key.end(), '_', '-');
        if (key == "data") s.data = v;
        else if (key == "out") s.out = v;
        else if (key == "features-file") s.features_file = v;
        else if (key == "seed") s.seed = detail::parse_number<std::uint64_t>(key, v);
        else if (key == "trials") s.trials = detail::parse_number<std::size_t>(key, v);
        else if (key == "frames") s.frames = detail::parse_number<std::size_t>(key, v);
        else if (key == "strategy") s.strategy = v;
        else if (key == "pooling") s.pooling = v;
        else if (key == "pca-dim") s.pca_dim = detail::parse_number<std::size_t>(key, v);
        else if (key == "metric") s.metric = v;
        else if (key == "measure") s.measure = v;
        else if (key == "seq") s.seq = v;
        else if (key == "groups") s.groups = v;
        else if (key == "axis") s.axis = v;
        else if (key == "values") s.values = v;
        else if (key == "identities") s.identities = detail::parse_number<std::size_t>(key, v);
        else if (key == "length") s.length = detail::parse_number<std::size_t>(key, v);
        else if (key == "period") s.period = detail::parse_number<std::size_t>(key, v);
        else if (key == "noise") s.noise = detail::parse_number<double>(key, v);
        else if (key == "width") s.width = detail::parse_number<int>(key, v);
        else if (key == "height") s.height = detail::parse_number<int>(key, v);
        // Keys written by config.lock that flags cannot set.
        else if (key == "extractor" || key == "fep-keep" || key == "fep-oversample" || key == "dissimilar-ratio") continue;
        else throw UsageError("config line " + std::to_string(no) + ": unknown key '" + key + "'");
    }
}

inline EvalConfig eval_config(const Settings& s) {
    EvalConfig c;
    c.strategy = {parse_strategy_kind(s.strategy), s.frames};
    c.pooling = parse_pooling(s.pooling);
    c.pca_dim = s.pca_dim;
    c.metric = parse_metric(s.metric);
    c.measure = parse_measure(s.measure);
    c.trials = s.trials;
    c.seed = s.seed;
    c.extractor_name = s.features_file.empty() ? "handcrafted" : "external:" + s.features_file;
    return c;
}

inline std::unique_ptr<Extractor> make_extractor(const Settings& s) {
    if (s.features_file.empty()) return std::make_unique<HandcraftedExtractor>();
    const FvecData data = read_fvec(s.features_file);
    FeatureMap map;
    for (std::size_t i = 0; i < data.vectors.size(); ++i) map[data.keys[i]] = data.vectors[i];
    return std::make_unique<ExternalExtractor>(std::move(map), data.dim);
}

namespace detail {

inline std::filesystem::path out_dir(const Settings& s) { return s.out.empty() ? "." : s.out; }

inline Dataset require_dataset(const Settings& s) {
    if (s.data.empty()) throw UsageError("--data is required");
    return load_dataset(s.data);
}

inline std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = reid::detail::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline const FrameSequence& find_sequence(const Dataset& ds, const std::string& spec) {
    const auto slash = spec.find('/');
    if (slash == std::string::npos) throw UsageError("--seq expects <camera>/<person>");
    const FrameSequence* seq = ds.find(spec.substr(0, slash), spec.substr(slash + 1));
    if (!seq) throw NotFound("sequence " + spec + " not in dataset");
    return *seq;
}

inline std::string signal_csv(const std::vector<double>& v) {
    std::string out = "frame_index,value\n";
    char buf[64];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", i, v[i]);
        out += buf;
    }
    return out;
}

inline void write_bundle(const std::filesystem::path& dir, const TrialReport& report, const std::string& label) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.txt", report_text(report));
    write_text(dir / "cmc.csv", cmc_csv(report));
    write_text(dir / "cmc.svg", cmc_svg({{label, report.average}}, "CMC (" + label + ")"));
    write_text(dir / "config.lock", config_lock(report.config));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_synth(const Settings& s, std::ostream& log) {
    SynthSpec spec;
    spec.identities = s.identities;
    spec.frames = s.length;
    spec.period = s.period;
    spec.noise = s.noise;
    spec.width = s.width;
    spec.height = s.height;
    spec.seed = s.seed;
    const auto root = detail::out_dir(s);
    write_synthetic(root, generate_synthetic(spec));
    log << "wrote " << 2 * spec.identities << " sequences to " << root.string() << "\n";
    return kExitOk;
}

/// raw.csv and regulated.csv for one sequence.
inline int cmd_fep(const Settings& s, std::ostream& log) {
    const Dataset ds = detail::require_dataset(s);
    if (s.seq.empty()) throw UsageError("--seq is required");
    const FepSignal sig = analyze_fep(detail::find_sequence(ds, s.seq));
    const auto dir = detail::out_dir(s);
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "raw.csv", detail::signal_csv(sig.raw));
    detail::write_text(dir / "regulated.csv", detail::signal_csv(sig.regulated));
    log << "wrote " << sig.raw.size() << " samples to " << (dir / "raw.csv").string() << " and "
        << (dir / "regulated.csv").string() << "\n";
    return kExitOk;
}

/// groups.csv: `person,camera,cycle,frames` with frames joined by ';'.
inline int cmd_cycles(const Settings& s, std::ostream& log) {
    const Dataset ds = detail::require_dataset(s);
    const SamplingStrategy strategy{parse_strategy_kind(s.strategy), s.frames};
    std::string csv = "person,camera,cycle,frames\n";
    std::size_t total = 0;
    for (std::size_t i = 0; i < ds.sequences().size(); ++i) {
        const auto& seq = ds.sequences()[i];
        RngHandle rng(derive_seed(s.seed, 1000003 + i));
        const FrameGroups groups = sequence_groups(seq, strategy, rng);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            csv += seq.person_id + "," + seq.camera_id + "," + std::to_string(g) + ",";
            for (std::size_t j = 0; j < groups[g].size(); ++j) {
                if (j) csv += ';';
                csv += std::to_string(seq.frame_numbers.at(groups[g][j]));
            }
            csv += "\n";
            ++total;
        }
    }
    const auto path = s.out.empty() ? std::filesystem::path("groups.csv") : std::filesystem::path(s.out);
    detail::write_text(path, csv);
    log << "wrote " << total << " frame groups to " << path.string() << "\n";
    return kExitOk;
}

/// Per-frame handcrafted features for every frame as FVEC + index.
inline int cmd_features(const Settings& s, std::ostream& log) {
    const Dataset ds = detail::require_dataset(s);
    const HandcraftedExtractor ex;
    std::vector<FeatureVector> vectors;
    std::vector<FrameKey> keys;
    for (const auto& seq : ds.sequences()) {
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            vectors.push_back(ex.extract_at(seq, i));
            keys.push_back({seq.person_id, seq.camera_id, seq.frame_numbers.at(i)});
        }
    }
    const auto path = s.out.empty() ? std::filesystem::path("features.fvec") : std::filesystem::path(s.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_fvec(path, vectors, keys);
    log << "wrote " << vectors.size() << " x " << ex.dim() << " features to " << path.string() << "\n";
    return kExitOk;
}

/// Pools FVEC rows by the groups file; each output row is keyed by its
/// cycle ordinal in the frame_index column.
inline int cmd_pool(const Settings& s, std::ostream& log) {
    if (s.features_file.empty()) throw UsageError("--features-file is required");
    if (s.groups.empty()) throw UsageError("--groups is required");
    const FvecData data = read_fvec(s.features_file);
    std::map<FrameKey, const FeatureVector*> by_key;
    for (std::size_t i = 0; i < data.vectors.size(); ++i) by_key[data.keys[i]] = &data.vectors[i];
    const PoolingMode mode = parse_pooling(s.pooling);

    std::istringstream in(detail::read_text(s.groups));
    std::string line;
    std::getline(in, line);  // header
    std::vector<FeatureVector> pooled;
    std::vector<FrameKey> keys;
    int no = 1;
    while (std::getline(in, line)) {
        ++no;
        if (reid::detail::trim(line).empty()) continue;
        const auto f = detail::split_list(line, ',');
        if (f.size() != 4) throw FormatError(s.groups + ":" + std::to_string(no) + ": expected person,camera,cycle,frames");
        auto number = [&](const std::string& t) {
            try {
                return std::stol(t);
            } catch (const std::exception&) {
                throw FormatError(s.groups + ":" + std::to_string(no) + ": bad frame number '" + t + "'");
            }
        };
        std::vector<FeatureVector> members;
        for (const auto& fr : detail::split_list(f[3], ';')) {
            const auto it = by_key.find({f[0], f[1], number(fr)});
            if (it == by_key.end()) throw NotFound("no feature for " + f[0] + "," + f[1] + "," + fr);
            members.push_back(*it->second);
        }
        pooled.push_back(pool(members, mode));
        keys.push_back({f[0], f[1], number(f[2])});
    }
    const auto path = s.out.empty() ? std::filesystem::path("pooled.fvec") : std::filesystem::path(s.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_fvec(path, pooled, keys);
    log << "wrote " << pooled.size() << " pooled descriptors to " << path.string() << "\n";
    return kExitOk;
}

/// Fits PCA + metric on every identity seen by both cameras; writes an RDM1 model.
inline int cmd_train(const Settings& s, std::ostream& log) {
    const Dataset ds = detail::require_dataset(s);
    const EvalConfig config = eval_config(s);
    const auto extractor = make_extractor(s);
    FrameFeatureCache cache(ds, *extractor);
    const auto [qcam, gcam] = camera_pair(ds);
    const auto ids = ds.identities_in_both(qcam, gcam);
    std::vector<Fallback> fallbacks;
    const TrainingSet train = collect_training(ds, {ids.begin(), ids.end()}, config, s.seed, qcam, gcam, cache, &fallbacks);
    const MetricModel model = fit_metric_model(train, config, s.seed);
    const auto path = s.out.empty() ? std::filesystem::path("model.rdm") : std::filesystem::path(s.out);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_model(path, model);
    log << "trained on " << train.rows.rows() << " descriptors from " << ids.size() << " identities ("
        << fallbacks.size() << " fallbacks); " << model.pca.output_dim() << "-d model written to " << path.string()
        << "\n";
    return kExitOk;
}

inline int cmd_eval(const Settings& s, std::ostream& log) {
    const Dataset ds = detail::require_dataset(s);
    const EvalConfig config = eval_config(s);
    const auto extractor = make_extractor(s);
    const TrialReport report = run_evaluation(ds, config, *extractor);
    const auto dir = detail::out_dir(s);
    detail::write_bundle(dir, report, to_string(config.strategy.kind) + "/" + to_string(config.pooling));
    char line[128];
    std::snprintf(line, sizeof line, "R-1 %.1f%%  R-5 %.1f%%  R-20 %.1f%%  (%zu trials, %zu fallbacks)\n",
                  100.0 * report.rank(1), 100.0 * report.rank(5), 100.0 * report.rank(20), report.per_trial.size(),
                  report.fallbacks.size());
    log << line << "report written to " << dir.string() << "\n";
    return kExitOk;
}

/// One evaluation per value of --axis; writes sweep.csv, report.txt,
/// cmc.svg with every curve, and config.lock of the base config.
inline int cmd_sweep(const Settings& s, std::ostream& log) {
    if (s.axis.empty()) throw UsageError("--axis is required");
    const auto values = detail::split_list(s.values, ',');
    if (values.empty()) throw UsageError("--values is required");
    const Dataset ds = detail::require_dataset(s);
    const EvalConfig base = eval_config(s);
    for (const auto& v : values) with_axis(base, s.axis, v);  // validate before the long run
    const auto extractor = make_extractor(s);
    FrameFeatureCache cache(ds, *extractor);
    const auto rows = run_sweep(ds, base, s.axis, values, cache);

    const auto dir = detail::out_dir(s);
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, CmcCurve>> curves;
    std::string report = "base configuration: " + fingerprint(base) + "\n\n" + sweep_text(s.axis, rows);
    for (const auto& row : rows) {
        curves.emplace_back(s.axis + "=" + row.value, row.report.average);
        report += "\n[" + s.axis + " = " + row.value + "]\n" + report_text(row.report);
    }
    detail::write_text(dir / "sweep.csv", sweep_csv(s.axis, rows));
    detail::write_text(dir / "report.txt", report);
    detail::write_text(dir / "cmc.svg", cmc_svg(curves, "CMC sweep over " + s.axis));
    detail::write_text(dir / "config.lock", config_lock(base) + "axis = " + s.axis + "\nvalues = " + s.values + "\n");
    log << sweep_text(s.axis, rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------

/// Entry point. Returns 0 on success, 2 on usage errors, 1 on pipeline
/// errors (diagnostic "error: <ErrorName>: <message>" on `err`).
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    Settings s;

    // The config file is applied before flag parsing so flags take precedence.
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        std::string path;
        if (a == "--config" && i + 1 < argc) path = argv[i + 1];
        else if (a.rfind("--config=", 0) == 0) path = a.substr(9);
        if (path.empty()) continue;
        try {
            apply_config(detail::read_text(path), s);
        } catch (const UsageError& e) {
            err << "usage error: " << path << ": " << e.what() << "\n";
            return kExitUsage;
        } catch (const Error& e) {
            err << "usage error: " << e.what() << "\n";
            return kExitUsage;
        }
    }

    CLI::App app{"Video person re-identification: walking-cycle frame selection, pooling and metric learning"};
    app.require_subcommand(1);
    app.fallthrough();  // --config may follow the subcommand
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    std::string config_path;
    app.add_option("--config", config_path, "Flat key = value config file; flags override it");

    const std::vector<std::string> strategies = {"representative", "random-whole", "equal-segments", "all",
                                                 "random-halves"};
    auto add_data = [&](CLI::App* c) { c->add_option("--data", s.data, "Dataset root"); };
    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", s.seed, "Random seed"); };
    auto add_out = [&](CLI::App* c, const std::string& what) { c->add_option("--out", s.out, what); };
    auto add_sampling = [&](CLI::App* c) {
        c->add_option("--frames", s.frames, "Frames per group K")->check(CLI::PositiveNumber);
        c->add_option("--strategy", s.strategy, "Frame sampling strategy")->check(CLI::IsMember(strategies));
    };
    auto add_model = [&](CLI::App* c) {
        add_sampling(c);
        c->add_option("--pooling", s.pooling, "Pooling mode")->check(CLI::IsMember({"max", "avg", "first"}));
        c->add_option("--pca-dim", s.pca_dim, "PCA output dimension")->check(CLI::PositiveNumber);
        c->add_option("--metric", s.metric, "Distance metric")->check(CLI::IsMember({"euclidean", "kissme"}));
        c->add_option("--features-file", s.features_file, "Precomputed per-frame FVEC features");
    };
    auto add_eval = [&](CLI::App* c) {
        add_model(c);
        c->add_option("--measure", s.measure, "Set-to-set distance")->check(CLI::IsMember({"min", "avg"}));
        c->add_option("--trials", s.trials, "Random splits to average")->check(CLI::PositiveNumber);
    };

    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-camera walking dataset");
    add_seed(synth);
    add_out(synth, "Output directory");
    synth->add_option("--identities", s.identities, "Number of identities")->check(CLI::PositiveNumber);
    synth->add_option("--length", s.length, "Frames per sequence");
    synth->add_option("--period", s.period, "Stride period in frames");
    synth->add_option("--noise", s.noise, "Uniform noise amplitude as a fraction of 255");
    synth->add_option("--width", s.width, "Frame width");
    synth->add_option("--height", s.height, "Frame height");

    auto* fep = app.add_subcommand("fep", "Write raw and regulated motion-energy signals of one sequence");
    add_data(fep);
    add_out(fep, "Output directory for raw.csv and regulated.csv");
    fep->add_option("--seq", s.seq, "Sequence as <camera>/<person>");

    auto* cycles = app.add_subcommand("cycles", "Detect walking cycles and write sampled frame groups");
    add_data(cycles);
    add_seed(cycles);
    add_sampling(cycles);
    add_out(cycles, "Groups CSV path");

    auto* features = app.add_subcommand("features", "Extract per-frame features to FVEC + index");
    add_data(features);
    add_out(features, "FVEC path");

    auto* pool_cmd = app.add_subcommand("pool", "Pool FVEC rows by frame groups");
    pool_cmd->add_option("--features-file", s.features_file, "Per-frame FVEC input");
    pool_cmd->add_option("--groups", s.groups, "Groups CSV from the cycles subcommand");
    pool_cmd->add_option("--pooling", s.pooling, "Pooling mode")->check(CLI::IsMember({"max", "avg", "first"}));
    add_out(pool_cmd, "Pooled FVEC path");

    auto* train = app.add_subcommand("train", "Fit PCA + metric on a dataset and write the model file");
    add_data(train);
    add_seed(train);
    add_model(train);
    add_out(train, "Model path");

    auto* eval = app.add_subcommand("eval", "Run the multi-trial evaluation and write the report bundle");
    add_data(eval);
    add_seed(eval);
    add_eval(eval);
    add_out(eval, "Report directory");

    auto* sweep = app.add_subcommand("sweep", "Evaluate across values of one configuration axis");
    add_data(sweep);
    add_seed(sweep);
    add_eval(sweep);
    add_out(sweep, "Report directory");
    sweep->add_option("--axis", s.axis, "Axis to vary")
        ->check(CLI::IsMember({"frames", "pooling", "pca-dim", "measure", "strategy", "metric"}));
    sweep->add_option("--values", s.values, "Comma-separated axis values");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(s, log);
        if (*fep) return cmd_fep(s, log);
        if (*cycles) return cmd_cycles(s, log);
        if (*features) return cmd_features(s, log);
        if (*pool_cmd) return cmd_pool(s, log);
        if (*train) return cmd_train(s, log);
        if (*eval) return cmd_eval(s, log);
        if (*sweep) return cmd_sweep(s, log);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.name() << ": " << e.what() << "\n";
        return kExitPipeline;
    } catch (const std::exception& e) {
        err << "error: IoError: " << e.what() << "\n";
        return kExitPipeline;
    }
    return kExitUsage;
}

}  // namespace reid::cli
