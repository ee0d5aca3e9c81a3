#pragma once

// Data-sensitivity experiments over an embedded corpus:
//   learning curve  - grow the training split one document at a time
//   fold variance   - k-fold train/test rotation and the spread of scores
//   noise sweep     - corrupt a growing fraction of training labels
//
// Seeding: every stochastic step of iteration t draws from
// derive_seed(master, "<kind>/<purpose>", t), so iterations are independent
// and may run in any order or concurrently without changing results.

#include "datasens/classifier.hpp"
#include "datasens/corpus.hpp"
#include "datasens/embedding.hpp"
#include "datasens/error.hpp"
#include "datasens/format.hpp"
#include "datasens/metrics.hpp"
#include "datasens/parallel.hpp"
#include "datasens/perturb.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace datasens {

enum class ExperimentKind { LearningCurve, FoldVariance, NoiseSweep };

constexpr std::string_view to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::LearningCurve: return "learning_curve";
    case ExperimentKind::FoldVariance: return "fold_variance";
    case ExperimentKind::NoiseSweep: return "noise_sweep";
    }
    return "unknown";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
    if (s == "learning_curve") return ExperimentKind::LearningCurve;
    if (s == "fold_variance") return ExperimentKind::FoldVariance;
    if (s == "noise_sweep") return ExperimentKind::NoiseSweep;
    return std::nullopt;
}

/// 0.00, 0.05, ..., 1.00
inline std::vector<double> default_noise_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) / 20.0);
    return grid;
}

struct ExperimentParams {
    double train_ratio = 0.8;                    // learning curve, noise sweep
    std::size_t repeats = 1;                     // learning curve: independent addition orders
    std::size_t folds = 5;                       // fold variance
    CorruptionMode mode = CorruptionMode::Random;  // noise sweep
    std::vector<double> grid = default_noise_grid();
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Everything a run depends on. `source` describes where the inputs came
/// from (paths, featurizer) and is carried verbatim for replay.
struct ExperimentManifest {
    ExperimentKind kind = ExperimentKind::LearningCurve;
    std::uint64_t dataset_fingerprint = 0;
    TrainConfig config;  // config.seed is the master seed
    ExperimentParams params;
    nlohmann::ordered_json source = nlohmann::ordered_json::object();

    std::uint64_t master_seed() const noexcept { return config.seed; }

    nlohmann::ordered_json body() const {
        nlohmann::ordered_json j;
        j["kind"] = std::string(to_string(kind));
        j["dataset_fingerprint"] = hex64(dataset_fingerprint);
        j["master_seed"] = config.seed;
        j["train_config"] = datasens::to_json(config);
        nlohmann::ordered_json p;
        switch (kind) {
        case ExperimentKind::LearningCurve:
            p["train_ratio"] = params.train_ratio;
            p["repeats"] = params.repeats;
            break;
        case ExperimentKind::FoldVariance:
            p["folds"] = params.folds;
            break;
        case ExperimentKind::NoiseSweep:
            p["train_ratio"] = params.train_ratio;
            p["mode"] = std::string(to_string(params.mode));
            p["grid"] = params.grid;
            break;
        }
        j["params"] = p;
        j["source"] = source;
        return j;
    }

    std::string hash() const { return hex64(fnv1a64(body().dump())); }

    nlohmann::ordered_json to_json() const {
        auto j = body();
        j["hash"] = hash();
        return j;
    }

    static ExperimentManifest from_json(const nlohmann::ordered_json& j) {
        try {
            ExperimentManifest m;
            auto kind = parse_experiment_kind(j.at("kind").get<std::string>());
            if (!kind) throw Error(ErrorCode::MalformedRecord, "manifest kind is not an experiment");
            m.kind = *kind;
            m.dataset_fingerprint = std::stoull(j.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
            m.config = train_config_from_json(j.at("train_config"));
            m.config.seed = j.at("master_seed").get<std::uint64_t>();
            const auto& p = j.at("params");
            if (p.contains("train_ratio")) m.params.train_ratio = p["train_ratio"].get<double>();
            if (p.contains("repeats")) m.params.repeats = p["repeats"].get<std::size_t>();
            if (p.contains("folds")) m.params.folds = p["folds"].get<std::size_t>();
            if (p.contains("mode")) m.params.mode = parse_corruption_mode(p["mode"].get<std::string>());
            if (p.contains("grid")) m.params.grid = p["grid"].get<std::vector<double>>();
            if (j.contains("source")) m.source = j["source"];
            if (j.contains("hash") && j["hash"].get<std::string>() != m.hash())
                throw Error(ErrorCode::MalformedRecord, "manifest hash does not match its contents");
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::MalformedRecord, std::string("manifest: ") + e.what());
        } catch (const std::invalid_argument&) {
            throw Error(ErrorCode::MalformedRecord, "manifest: bad fingerprint");
        }
    }
};

inline std::uint64_t fingerprint(const EmbeddedDataset& data) {
    return splitmix64(fingerprint(data.dataset) ^ splitmix64(fingerprint(data.vectors)));
}

// ---------------------------------------------------------------------------

struct TrainSummary {
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
    double best_val_accuracy = 0.0;
};

struct IterationRecord {
    std::size_t index = 0;   // position in the series
    std::size_t repeat = 0;  // learning curve only
    double key = 0.0;        // documents used | fold number | corruption fraction
    bool skipped = false;
    std::string skip_reason;
    LabelScores scores;
    std::size_t train_documents = 0;
    std::size_t train_sentences = 0;
    std::size_t test_sentences = 0;
    std::vector<std::string> test_docs;
    TrainSummary training;
    std::optional<CorruptionPlan> corruption;
    std::size_t corrupted_labels = 0;
};

/// Max minus min across folds; a label only counts folds where it has support.
struct SeriesSpread {
    std::vector<std::optional<double>> per_label_f1;
    double weighted_f1 = 0.0;
};

struct ExperimentSeries {
    ExperimentManifest manifest;
    std::vector<std::string> labels;
    std::vector<IterationRecord> records;
    std::optional<SeriesSpread> spread;
};

struct RunOptions {
    std::size_t threads = 1;
};

struct EvaluationResult {
    LabelScores scores;
    TrainHistory history;
};

/// Trains a fresh model on `train_rows` (optionally with replacement labels)
/// and scores it on `test_rows` against gold labels.
inline EvaluationResult train_and_evaluate(const EmbeddedDataset& data,
                                           std::span<const std::size_t> train_rows,
                                           std::span<const std::size_t> test_rows,
                                           const TrainConfig& config,
                                           std::optional<std::span<const LabelId>> train_labels = {}) {
    const std::size_t classes = data.dataset.schema().size();
    const Matrix x = data.features(train_rows);
    std::vector<LabelId> y =
        train_labels ? std::vector<LabelId>(train_labels->begin(), train_labels->end())
                     : data.labels(train_rows);
    auto trained = train(x, y, classes, config);
    const auto pred = predict(trained.model, data.features(test_rows));
    const auto gold = data.labels(test_rows);
    return {evaluate(gold, pred, classes), std::move(trained.history)};
}

namespace detail {

inline std::uint64_t child_seed(const ExperimentManifest& m, ExperimentKind kind,
                                std::string_view purpose, std::uint64_t t) {
    return derive_seed(m.master_seed(), std::string(to_string(kind)) + "/" + std::string(purpose), t);
}

inline void fill_result(IterationRecord& rec, EvaluationResult&& r) {
    rec.scores = std::move(r.scores);
    rec.training = {r.history.best_epoch, r.history.stopped_epoch, r.history.best_val_accuracy};
}

/// Training failures caused by too little data become skipped records.
template <class Fn>
void run_or_skip(IterationRecord& rec, Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateValidation && e.code() != ErrorCode::EmptyEvaluation) throw;
        rec.skipped = true;
        rec.skip_reason = e.what();
    }
}

inline TrainConfig iteration_config(const ExperimentManifest& m, ExperimentKind kind, std::uint64_t t) {
    TrainConfig c = m.config;
    c.seed = child_seed(m, kind, "train", t);
    return c;
}

} // namespace detail

/// The train/test split shared by the learning curve and the noise sweep.
inline DocumentSplit experiment_split(const Dataset& dataset, const ExperimentManifest& m) {
    return split_documents(dataset, m.params.train_ratio,
                           detail::child_seed(m, ExperimentKind::LearningCurve, "split", 0));
}

inline ExperimentSeries run_learning_curve(const EmbeddedDataset& data, ExperimentManifest manifest,
                                           RunOptions options = {}) {
    manifest.kind = ExperimentKind::LearningCurve;
    manifest.config.validate();
    if (manifest.params.repeats == 0) throw Error(ErrorCode::InvalidArgument, "repeats must be positive");
    const auto& ds = data.dataset;
    const auto split = experiment_split(ds, manifest);
    const auto test_rows = ds.sentences_in(split.test_docs);

    const std::size_t n_train_docs = split.train_docs.size();
    if (n_train_docs < 2)
        throw Error(ErrorCode::DegenerateSplit, "a learning curve needs at least 2 training documents");
    std::vector<std::vector<std::string>> orders;
    for (std::size_t r = 0; r < manifest.params.repeats; ++r) {
        auto order = split.train_docs;
        Rng rng(detail::child_seed(manifest, manifest.kind, "order", r));
        rng.shuffle(order);
        orders.push_back(std::move(order));
    }

    ExperimentSeries series{manifest, ds.schema().labels(), {}, {}};
    series.records.resize(manifest.params.repeats * n_train_docs);
    parallel_for(series.records.size(), options.threads, [&](std::size_t t) {
        const std::size_t r = t / n_train_docs, used = t % n_train_docs + 1;
        auto& rec = series.records[t];
        rec.index = t;
        rec.repeat = r;
        rec.key = static_cast<double>(used);
        rec.train_documents = used;
        rec.test_docs = split.test_docs;
        rec.test_sentences = test_rows.size();
        const std::vector<std::string> docs(orders[r].begin(),
                                            orders[r].begin() + static_cast<std::ptrdiff_t>(used));
        const auto train_rows = ds.sentences_in(docs);  // dataset order
        rec.train_sentences = train_rows.size();
        detail::run_or_skip(rec, [&] {
            if (train_rows.size() < 2)
                throw Error(ErrorCode::DegenerateValidation, "fewer than 2 training sentences");
            detail::fill_result(rec, train_and_evaluate(data, train_rows, test_rows,
                                                        detail::iteration_config(manifest, manifest.kind, t)));
        });
    });
    series.manifest.dataset_fingerprint = fingerprint(data);
    return series;
}

inline ExperimentSeries run_fold_variance(const EmbeddedDataset& data, ExperimentManifest manifest,
                                          RunOptions options = {}) {
    manifest.kind = ExperimentKind::FoldVariance;
    manifest.config.validate();
    const auto& ds = data.dataset;
    const auto plan = make_folds(ds, manifest.params.folds, detail::child_seed(manifest, manifest.kind, "folds", 0));

    ExperimentSeries series{manifest, ds.schema().labels(), {}, {}};
    series.records.resize(plan.size());
    parallel_for(plan.size(), options.threads, [&](std::size_t j) {
        auto& rec = series.records[j];
        rec.index = j;
        rec.key = static_cast<double>(j + 1);
        rec.test_docs = plan.folds[j];
        const auto train_docs = plan.complement(j);
        rec.train_documents = train_docs.size();
        const auto train_rows = ds.sentences_in(train_docs);
        const auto test_rows = ds.sentences_in(plan.folds[j]);
        rec.train_sentences = train_rows.size();
        rec.test_sentences = test_rows.size();
        detail::run_or_skip(rec, [&] {
            if (test_rows.empty()) throw Error(ErrorCode::EmptyEvaluation, "test fold has no sentences");
            detail::fill_result(rec, train_and_evaluate(data, train_rows, test_rows,
                                                        detail::iteration_config(manifest, manifest.kind, j)));
        });
    });

    SeriesSpread spread;
    const std::size_t c = series.labels.size();
    spread.per_label_f1.resize(c);
    std::optional<double> lo, hi;
    for (const auto& rec : series.records) {
        if (rec.skipped) continue;
        lo = std::min(lo.value_or(rec.scores.weighted_f1), rec.scores.weighted_f1);
        hi = std::max(hi.value_or(rec.scores.weighted_f1), rec.scores.weighted_f1);
    }
    spread.weighted_f1 = lo ? *hi - *lo : 0.0;
    for (std::size_t l = 0; l < c; ++l) {
        std::optional<double> a, b;
        for (const auto& rec : series.records) {
            if (rec.skipped || rec.scores.per_label[l].support == 0) continue;
            const double f = rec.scores.per_label[l].f1;
            a = std::min(a.value_or(f), f);
            b = std::max(b.value_or(f), f);
        }
        if (a) spread.per_label_f1[l] = *b - *a;
    }
    series.spread = std::move(spread);
    series.manifest.dataset_fingerprint = fingerprint(data);
    return series;
}

inline ExperimentSeries run_noise_sweep(const EmbeddedDataset& data, ExperimentManifest manifest,
                                        RunOptions options = {}) {
    manifest.kind = ExperimentKind::NoiseSweep;
    manifest.config.validate();
    const auto& grid = manifest.params.grid;
    if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "fraction grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] >= 0.0 && grid[i] <= 1.0))
            throw Error(ErrorCode::InvalidArgument, "grid fractions must lie in [0, 1]");
        if (i && !(grid[i] > grid[i - 1]))
            throw Error(ErrorCode::InvalidArgument, "grid must be strictly ascending");
    }
    const auto& ds = data.dataset;
    const std::size_t classes = ds.schema().size();
    const auto split = experiment_split(ds, manifest);
    const auto train_rows = ds.sentences_in(split.train_docs);
    const auto test_rows = ds.sentences_in(split.test_docs);
    const auto gold_train = data.labels(train_rows);

    ExperimentSeries series{manifest, ds.schema().labels(), {}, {}};
    series.records.resize(grid.size());
    parallel_for(grid.size(), options.threads, [&](std::size_t t) {
        auto& rec = series.records[t];
        rec.index = t;
        rec.key = grid[t];
        rec.train_documents = split.train_docs.size();
        rec.train_sentences = train_rows.size();
        rec.test_sentences = test_rows.size();
        rec.test_docs = split.test_docs;
        // position selection is seeded independently of the mode
        const auto plan = make_plan(manifest.params.mode, grid[t], classes,
                                    detail::child_seed(manifest, manifest.kind, "corrupt", t));
        const auto labels = corrupt(gold_train, plan, classes);
        rec.corruption = plan;
        for (std::size_t i = 0; i < labels.size(); ++i) rec.corrupted_labels += labels[i] != gold_train[i];
        detail::run_or_skip(rec, [&] {
            detail::fill_result(rec, train_and_evaluate(data, train_rows, test_rows,
                                                        detail::iteration_config(manifest, manifest.kind, t),
                                                        std::span<const LabelId>(labels)));
        });
    });
    series.manifest.dataset_fingerprint = fingerprint(data);
    return series;
}

inline ExperimentSeries run_experiment(const EmbeddedDataset& data, const ExperimentManifest& manifest,
                                       RunOptions options = {}) {
    switch (manifest.kind) {
    case ExperimentKind::LearningCurve: return run_learning_curve(data, manifest, options);
    case ExperimentKind::FoldVariance: return run_fold_variance(data, manifest, options);
    case ExperimentKind::NoiseSweep: return run_noise_sweep(data, manifest, options);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown experiment kind");
}

/// One point of a learning curve averaged over addition orders.
struct CurvePoint {
    double key = 0.0;
    double weighted_f1 = 0.0;
    std::size_t runs = 0;  // non-skipped records at this key
};

/// Mean weighted F1 per key over non-skipped records, keys ascending.
inline std::vector<CurvePoint> mean_curve(const ExperimentSeries& s) {
    std::map<double, CurvePoint> by_key;
    for (const auto& r : s.records) {
        if (r.skipped) continue;
        auto& p = by_key[r.key];
        p.key = r.key;
        p.weighted_f1 += r.scores.weighted_f1;
        ++p.runs;
    }
    std::vector<CurvePoint> out;
    for (auto& [key, p] : by_key) {
        p.weighted_f1 /= static_cast<double>(p.runs);
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Result files

namespace detail {

inline nlohmann::ordered_json key_json(const ExperimentSeries& s, const IterationRecord& r) {
    if (s.manifest.kind == ExperimentKind::NoiseSweep) return r.key;
    return static_cast<std::uint64_t>(r.key);
}

inline std::string key_text(const ExperimentSeries& s, const IterationRecord& r) {
    if (s.manifest.kind == ExperimentKind::NoiseSweep) return fmt::shortest(r.key);
    return std::to_string(static_cast<std::uint64_t>(r.key));
}

inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

} // namespace detail

/// One JSON object per iteration; fold-variance series end with a spread record.
inline void write_records(std::ostream& out, const ExperimentSeries& s) {
    const std::string hash = s.manifest.hash();
    for (const auto& r : s.records) {
        nlohmann::ordered_json j;
        j["type"] = "iteration";
        j["manifest"] = hash;
        j["kind"] = std::string(to_string(s.manifest.kind));
        j["index"] = r.index;
        if (s.manifest.kind == ExperimentKind::LearningCurve) j["repeat"] = r.repeat;
        j["key"] = detail::key_json(s, r);
        j["skipped"] = r.skipped;
        if (r.skipped) j["reason"] = r.skip_reason;
        j["train_documents"] = r.train_documents;
        j["train_sentences"] = r.train_sentences;
        j["test_sentences"] = r.test_sentences;
        j["test_docs"] = r.test_docs;
        if (r.corruption) {
            j["corruption"] = r.corruption->to_json();
            j["corrupted_labels"] = r.corrupted_labels;
        }
        if (!r.skipped) {
            j["weighted_f1"] = r.scores.weighted_f1;
            nlohmann::ordered_json labels = nlohmann::ordered_json::array();
            for (std::size_t l = 0; l < s.labels.size(); ++l) {
                const auto& c = r.scores.per_label[l];
                nlohmann::ordered_json e;
                e["label"] = s.labels[l];
                e["precision"] = c.precision;
                e["recall"] = c.recall;
                e["f1"] = c.f1;
                e["support"] = c.support;
                labels.push_back(std::move(e));
            }
            j["labels"] = std::move(labels);
            j["epochs_run"] = r.training.stopped_epoch;
            j["best_epoch"] = r.training.best_epoch;
            j["best_val_accuracy"] = r.training.best_val_accuracy;
        }
        j["zero_division"] = 0;
        out << j.dump() << '\n';
    }
    if (s.spread) {
        nlohmann::ordered_json j;
        j["type"] = "spread";
        j["manifest"] = hash;
        j["kind"] = std::string(to_string(s.manifest.kind));
        j["weighted_f1"] = s.spread->weighted_f1;
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (std::size_t l = 0; l < s.labels.size(); ++l)
            per[s.labels[l]] = s.spread->per_label_f1[l] ? nlohmann::ordered_json(*s.spread->per_label_f1[l])
                                                         : nlohmann::ordered_json();
        j["per_label_f1"] = std::move(per);
        out << j.dump() << '\n';
    }
}

/// Flat table: one row per iteration, one F1 column per label, then weighted F1.
/// Skipped iterations leave the score cells empty.
inline void write_series_csv(std::ostream& out, const ExperimentSeries& s) {
    out << "index,";
    if (s.manifest.kind == ExperimentKind::LearningCurve) out << "repeat,";
    out << "key,train_sentences,skipped";
    for (const auto& l : s.labels) out << ',' << detail::csv_cell(l);
    out << ",weighted_f1\n";
    for (const auto& r : s.records) {
        out << r.index << ',';
        if (s.manifest.kind == ExperimentKind::LearningCurve) out << r.repeat << ',';
        out << detail::key_text(s, r) << ',' << r.train_sentences << ',' << (r.skipped ? 1 : 0);
        for (std::size_t l = 0; l < s.labels.size(); ++l) {
            out << ',';
            if (!r.skipped) out << fmt::shortest(r.scores.per_label[l].f1);
        }
        out << ',';
        if (!r.skipped) out << fmt::shortest(r.scores.weighted_f1);
        out << '\n';
    }
}

inline std::string records_text(const ExperimentSeries& s) {
    std::ostringstream os;
    write_records(os, s);
    return os.str();
}

} // namespace datasens
