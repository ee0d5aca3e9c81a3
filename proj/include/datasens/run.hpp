#pragma once

// Command layer shared by the CLI and the tests: input resolution, running
// one command into an output directory, and replaying a run from the
// manifest it wrote.

#include "datasens/classifier.hpp"
#include "datasens/corpus.hpp"
#include "datasens/embedding.hpp"
#include "datasens/experiments.hpp"
#include "datasens/homogeneity.hpp"
#include "datasens/metrics.hpp"
#include "datasens/synthetic.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace datasens {

/// Where a command's inputs come from. Exactly one embedding source: a
/// file, or the hash featurizer (hash_dim > 0).
struct DataSource {
    std::string data_path;
    std::vector<std::string> labels;  // explicit schema order; empty = header or first appearance
    std::string embeddings_path;
    std::size_t hash_dim = 0;
    std::uint64_t hash_seed = 0;
    std::size_t group_size = 1;

    void validate() const {
        if (data_path.empty()) throw Error(ErrorCode::InvalidArgument, "no dataset path given");
        if (embeddings_path.empty() == (hash_dim == 0))
            throw Error(ErrorCode::InvalidArgument,
                        "give exactly one embedding source: an embeddings file or --hash-dim");
        if (group_size == 0) throw Error(ErrorCode::InvalidGroupSize, "group size must be positive");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["data"] = data_path;
        if (!labels.empty()) j["labels"] = labels;
        if (!embeddings_path.empty()) j["embeddings"] = embeddings_path;
        else {
            j["hash_dim"] = hash_dim;
            j["hash_seed"] = hash_seed;
        }
        j["group_size"] = group_size;
        return j;
    }

    static DataSource from_json(const nlohmann::ordered_json& j) {
        DataSource s;
        s.data_path = j.at("data").get<std::string>();
        if (j.contains("labels")) s.labels = j["labels"].get<std::vector<std::string>>();
        if (j.contains("embeddings")) s.embeddings_path = j["embeddings"].get<std::string>();
        if (j.contains("hash_dim")) s.hash_dim = j["hash_dim"].get<std::size_t>();
        if (j.contains("hash_seed")) s.hash_seed = j["hash_seed"].get<std::uint64_t>();
        if (j.contains("group_size")) s.group_size = j["group_size"].get<std::size_t>();
        return s;
    }

    /// Same source with absolute paths so a manifest replays from any directory.
    DataSource absolute() const {
        DataSource s = *this;
        s.data_path = std::filesystem::absolute(data_path).lexically_normal().string();
        if (!embeddings_path.empty())
            s.embeddings_path = std::filesystem::absolute(embeddings_path).lexically_normal().string();
        return s;
    }
};

inline Dataset load_source_dataset(const DataSource& src) {
    std::optional<std::vector<std::string>> labels;
    if (!src.labels.empty()) labels = src.labels;
    Dataset ds = load_dataset(src.data_path, labels);
    if (src.group_size > 1) ds = group_pseudo_documents(ds, src.group_size);
    return ds;
}

inline EmbeddedDataset load_inputs(const DataSource& src) {
    src.validate();
    Dataset ds = load_source_dataset(src);
    EmbeddingStore store = src.embeddings_path.empty() ? featurize(ds, src.hash_dim, src.hash_seed)
                                                       : load_embeddings(src.embeddings_path);
    return attach(ds, store);
}

enum class Command { Synth, Train, LearningCurve, FoldVariance, NoiseSweep, Homogeneity };

constexpr std::string_view to_string(Command c) {
    switch (c) {
    case Command::Synth: return "synth";
    case Command::Train: return "train";
    case Command::LearningCurve: return "learning_curve";
    case Command::FoldVariance: return "fold_variance";
    case Command::NoiseSweep: return "noise_sweep";
    case Command::Homogeneity: return "homogeneity";
    }
    return "unknown";
}

inline std::optional<Command> parse_command(std::string_view s) {
    for (auto c : {Command::Synth, Command::Train, Command::LearningCurve, Command::FoldVariance,
                   Command::NoiseSweep, Command::Homogeneity})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

struct RunConfig {
    Command command = Command::LearningCurve;
    DataSource source;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    TrainConfig train;
    ExperimentParams params;
    std::size_t k = 20;                 // homogeneity
    SyntheticSpec synth;                // synth
    EmbeddingFormat synth_format = EmbeddingFormat::JsonLines;
    std::size_t threads = 1;            // never changes results
    std::optional<std::uint64_t> expected_fingerprint;  // set when replaying
};

namespace detail {

inline ExperimentKind experiment_kind(Command c) {
    switch (c) {
    case Command::LearningCurve: return ExperimentKind::LearningCurve;
    case Command::FoldVariance: return ExperimentKind::FoldVariance;
    case Command::NoiseSweep: return ExperimentKind::NoiseSweep;
    default: throw Error(ErrorCode::InvalidArgument, "not an experiment command");
    }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

inline std::filesystem::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw Error(ErrorCode::IoFailure, "cannot create output directory '" + dir + "'");
    return dir;
}

inline void check_fingerprint(const RunConfig& cfg, std::uint64_t actual) {
    if (cfg.expected_fingerprint && *cfg.expected_fingerprint != actual)
        throw Error(ErrorCode::FingerprintMismatch,
                    "inputs hash to " + hex64(actual) + ", manifest recorded " +
                        hex64(*cfg.expected_fingerprint));
}

/// Manifest layout for the non-experiment commands, hashed like ExperimentManifest.
inline nlohmann::ordered_json command_manifest(const RunConfig& cfg, std::uint64_t fp,
                                               nlohmann::ordered_json params) {
    nlohmann::ordered_json j;
    j["kind"] = std::string(to_string(cfg.command));
    j["dataset_fingerprint"] = hex64(fp);
    j["master_seed"] = cfg.seed;
    if (cfg.command == Command::Train) {
        TrainConfig t = cfg.train;
        t.seed = cfg.seed;
        j["train_config"] = to_json(t);
    }
    j["params"] = std::move(params);
    if (cfg.command != Command::Synth) j["source"] = cfg.source.to_json();
    j["hash"] = hex64(fnv1a64(j.dump()));
    return j;
}

inline std::string dump_manifest(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

inline nlohmann::ordered_json synth_params(const RunConfig& cfg) {
    nlohmann::ordered_json p;
    p["classes"] = cfg.synth.num_classes;
    p["docs"] = cfg.synth.num_docs;
    p["sentences_per_doc"] = cfg.synth.sentences_per_doc;
    p["dim"] = cfg.synth.embedding_dim;
    p["spread"] = cfg.synth.cluster_spread;
    p["separation"] = cfg.synth.center_separation;
    p["format"] = cfg.synth_format == EmbeddingFormat::Csv ? "csv" : "jsonl";
    return p;
}

} // namespace detail

/// Runs one command; returns the files written, in a fixed order.
inline std::vector<std::filesystem::path> execute(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<fs::path> written;
    auto emit = [&](const fs::path& p, const std::string& content) {
        detail::write_file(p, content);
        written.push_back(p);
    };

    if (cfg.command == Command::Synth) {
        auto [ds, store] = generate_synthetic(cfg.synth, cfg.seed);
        const auto dir = detail::prepare_out_dir(cfg.out_dir);
        std::ostringstream data, vec;
        write_dataset(data, ds);
        write_embeddings(vec, store, cfg.synth_format);
        const std::uint64_t fp = fingerprint(attach(ds, store));
        detail::check_fingerprint(cfg, fp);
        emit(dir / "data.jsonl", data.str());
        emit(dir / (cfg.synth_format == EmbeddingFormat::Csv ? "embeddings.csv" : "embeddings.jsonl"), vec.str());
        emit(dir / "manifest.json", detail::dump_manifest(detail::command_manifest(cfg, fp, detail::synth_params(cfg))));
        return written;
    }

    const DataSource src = cfg.source.absolute();
    const EmbeddedDataset data = load_inputs(src);
    const std::uint64_t fp = fingerprint(data);
    detail::check_fingerprint(cfg, fp);
    RunConfig resolved = cfg;
    resolved.source = src;

    switch (cfg.command) {
    case Command::LearningCurve:
    case Command::FoldVariance:
    case Command::NoiseSweep: {
        ExperimentManifest m;
        m.kind = detail::experiment_kind(cfg.command);
        m.config = cfg.train;
        m.config.seed = cfg.seed;
        m.params = cfg.params;
        m.source = src.to_json();
        const auto series = run_experiment(data, m, {cfg.threads});
        const auto dir = detail::prepare_out_dir(cfg.out_dir);
        std::ostringstream csv;
        write_series_csv(csv, series);
        emit(dir / "records.jsonl", records_text(series));
        emit(dir / "series.csv", csv.str());
        emit(dir / "manifest.json", detail::dump_manifest(series.manifest.to_json()));
        break;
    }
    case Command::Homogeneity: {
        const auto prof = profile(data, cfg.k, cfg.threads);
        nlohmann::ordered_json params;
        params["k"] = cfg.k;
        const auto manifest = detail::command_manifest(resolved, fp, params);
        auto record = to_json(prof);
        record["manifest"] = manifest["hash"];
        const auto dir = detail::prepare_out_dir(cfg.out_dir);
        std::ostringstream csv;
        write_profile_csv(csv, prof);
        emit(dir / "profile.csv", csv.str());
        emit(dir / "profile.json", record.dump(2) + "\n");
        emit(dir / "manifest.json", detail::dump_manifest(manifest));
        break;
    }
    case Command::Train: {
        const auto& ds = data.dataset;
        const auto split = split_documents(ds, cfg.params.train_ratio, derive_seed(cfg.seed, "train/split"));
        const auto train_rows = ds.sentences_in(split.train_docs);
        const auto test_rows = ds.sentences_in(split.test_docs);
        TrainConfig tc = cfg.train;
        tc.seed = cfg.seed;
        auto trained = train(data.features(train_rows), data.labels(train_rows), ds.schema().size(), tc);
        const auto gold = data.labels(test_rows);
        const auto pred = predict(trained.model, data.features(test_rows));
        const auto cm = confusion(gold, pred, ds.schema().size());
        const auto scores = per_label_scores(cm);

        nlohmann::ordered_json params;
        params["train_ratio"] = cfg.params.train_ratio;
        const auto manifest = detail::command_manifest(resolved, fp, params);

        nlohmann::ordered_json rep;
        rep["manifest"] = manifest["hash"];
        rep["train_docs"] = split.train_docs;
        rep["test_docs"] = split.test_docs;
        rep["weighted_f1"] = scores.weighted_f1;
        nlohmann::ordered_json labels = nlohmann::ordered_json::array();
        for (std::size_t l = 0; l < ds.schema().size(); ++l) {
            const auto& c = scores.per_label[l];
            labels.push_back({{"label", ds.schema().name(static_cast<LabelId>(l))},
                              {"precision", c.precision},
                              {"recall", c.recall},
                              {"f1", c.f1},
                              {"support", c.support}});
        }
        rep["labels"] = labels;
        nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
        for (std::size_t g = 0; g < cm.classes(); ++g) {
            std::vector<std::uint64_t> row;
            for (std::size_t p = 0; p < cm.classes(); ++p) row.push_back(cm(g, p));
            matrix.push_back(row);
        }
        rep["confusion"] = matrix;
        nlohmann::ordered_json hist;
        hist["best_epoch"] = trained.history.best_epoch;
        hist["stopped_epoch"] = trained.history.stopped_epoch;
        hist["best_val_accuracy"] = trained.history.best_val_accuracy;
        nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
        for (const auto& e : trained.history.epochs)
            epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
        hist["epochs"] = epochs;
        rep["history"] = hist;

        const auto dir = detail::prepare_out_dir(cfg.out_dir);
        emit(dir / "model.json", serialize_checkpoint({trained.model, ds.schema().labels(), tc}));
        emit(dir / "scores.json", rep.dump(2) + "\n");
        emit(dir / "manifest.json", detail::dump_manifest(manifest));
        break;
    }
    case Command::Synth: break;
    }
    return written;
}

/// Rebuilds the RunConfig recorded in a manifest.
inline RunConfig config_from_manifest(const nlohmann::ordered_json& j) {
    try {
        if (j.contains("hash")) {
            auto body = j;
            body.erase("hash");
            const bool experiment = parse_experiment_kind(j.at("kind").get<std::string>()).has_value();
            const std::string expect = experiment ? ExperimentManifest::from_json(j).hash()
                                                  : hex64(fnv1a64(body.dump()));
            if (expect != j["hash"].get<std::string>())
                throw Error(ErrorCode::MalformedRecord, "manifest hash does not match its contents");
        }
        auto cmd = parse_command(j.at("kind").get<std::string>());
        if (!cmd) throw Error(ErrorCode::MalformedRecord, "unknown manifest kind");
        RunConfig cfg;
        cfg.command = *cmd;
        cfg.seed = j.at("master_seed").get<std::uint64_t>();
        cfg.expected_fingerprint = std::stoull(j.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
        if (j.contains("source")) cfg.source = DataSource::from_json(j["source"]);
        const auto& p = j.at("params");
        switch (*cmd) {
        case Command::LearningCurve:
        case Command::FoldVariance:
        case Command::NoiseSweep: {
            const auto m = ExperimentManifest::from_json(j);
            cfg.train = m.config;
            cfg.params = m.params;
            break;
        }
        case Command::Train:
            cfg.train = train_config_from_json(j.at("train_config"));
            cfg.params.train_ratio = p.at("train_ratio").get<double>();
            break;
        case Command::Homogeneity:
            cfg.k = p.at("k").get<std::size_t>();
            break;
        case Command::Synth:
            cfg.synth.num_classes = p.at("classes").get<std::size_t>();
            cfg.synth.num_docs = p.at("docs").get<std::size_t>();
            cfg.synth.sentences_per_doc = p.at("sentences_per_doc").get<std::size_t>();
            cfg.synth.embedding_dim = p.at("dim").get<std::size_t>();
            cfg.synth.cluster_spread = p.at("spread").get<double>();
            cfg.synth.center_separation = p.at("separation").get<double>();
            cfg.synth_format = p.at("format").get<std::string>() == "csv" ? EmbeddingFormat::Csv
                                                                          : EmbeddingFormat::JsonLines;
            break;
        }
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw Error(ErrorCode::MalformedRecord, "manifest: bad fingerprint");
    }
}

inline nlohmann::ordered_json read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open manifest '" + path + "'");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
    }
}

/// Re-executes the run recorded in `manifest_path`, writing into `out_dir`.
inline std::vector<std::filesystem::path> replay(const std::string& manifest_path,
                                                 const std::string& out_dir, std::size_t threads = 1) {
    RunConfig cfg = config_from_manifest(read_manifest(manifest_path));
    cfg.out_dir = out_dir;
    cfg.threads = threads;
    return execute(cfg);
}

} // namespace datasens
