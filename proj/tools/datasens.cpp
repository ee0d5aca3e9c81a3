// datasens: dataset-sensitivity diagnostics for sentence classifiers.
//
// Exit codes: 0 success, 2 I/O, 3 input format, 4 invalid arguments.

#include "datasens/datasens.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace datasens;

constexpr int kExitIo = 2;
constexpr int kExitFormat = 3;
constexpr int kExitArgs = 4;

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::Io: return kExitIo;
    case ErrorCategory::Format: return kExitFormat;
    case ErrorCategory::Argument: return kExitArgs;
    }
    return 1;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = fmt::trim(item); !t.empty()) out.emplace_back(t);
    return out;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> grid;
    for (const auto& item : split_list(s)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw Error(ErrorCode::InvalidArgument, "bad grid value '" + item + "'");
        grid.push_back(v);
    }
    return grid;
}

struct Flags {
    RunConfig cfg;
    std::string labels;
    std::string grid;
    std::string mode;
    std::string manifest;
    std::string synth_format = "jsonl";
    bool stats_json = false;
};

void add_input_flags(CLI::App& app, Flags& f) {
    app.add_option("--data", f.cfg.source.data_path, "Dataset file (one JSON record per line)")->required();
    app.add_option("--labels", f.labels, "Explicit label order, comma separated");
    app.add_option("--embeddings", f.cfg.source.embeddings_path, "Embedding file (JSON lines or CSV)");
    app.add_option("--hash-dim", f.cfg.source.hash_dim, "Use the hash featurizer with this dimension");
    app.add_option("--hash-seed", f.cfg.source.hash_seed, "Seed of the hash featurizer");
    app.add_option("--group-size", f.cfg.source.group_size,
                   "Group consecutive documents into pseudo-documents of this size");
}

void add_run_flags(CLI::App& app, Flags& f) {
    app.add_option("--out", f.cfg.out_dir, "Output directory");
    app.add_option("--seed", f.cfg.seed, "Master seed");
    app.add_option("--threads", f.cfg.threads, "Worker threads (results do not depend on this)");
}

void add_train_flags(CLI::App& app, Flags& f) {
    auto& t = f.cfg.train;
    app.add_option("--max-epochs", t.max_epochs, "Maximum training epochs");
    app.add_option("--patience", t.patience, "Early-stopping patience in epochs");
    app.add_option("--validation-fraction", t.validation_fraction, "Validation holdout fraction");
    app.add_option("--batch-size", t.batch_size, "Mini-batch size");
    app.add_option("--hidden", t.hidden, "Hidden units");
    app.add_option("--learning-rate", t.learning_rate, "Adam step size");
}

int print_stats(const Flags& f) {
    std::optional<std::vector<std::string>> labels;
    if (!f.labels.empty()) labels = split_list(f.labels);
    Dataset ds = load_dataset(f.cfg.source.data_path, labels);
    if (f.cfg.source.group_size > 1) ds = group_pseudo_documents(ds, f.cfg.source.group_size);
    const auto counts = ds.label_counts();
    if (f.stats_json) {
        nlohmann::ordered_json j;
        j["sentences"] = ds.size();
        j["documents"] = ds.documents().size();
        nlohmann::ordered_json per = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < counts.size(); ++i) per[ds.schema().labels()[i]] = counts[i];
        j["labels"] = per;
        j["fingerprint"] = hex64(fingerprint(ds));
        std::cout << j.dump(2) << '\n';
        return 0;
    }
    for (std::size_t i = 0; i < counts.size(); ++i)
        std::cout << ds.schema().labels()[i] << '\t' << counts[i] << '\n';
    std::cout << "Total\t" << ds.size() << '\n' << "Documents\t" << ds.documents().size() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dataset-sensitivity diagnostics for sentence classification"};
    app.require_subcommand(1);

    Flags f;
    if (const char* env = std::getenv("DATASENS_OUT_DIR"); env && *env) f.cfg.out_dir = env;
    else f.cfg.out_dir = "datasens-out";

    auto* synth = app.add_subcommand("synth", "Generate a synthetic clustered corpus");
    synth->add_option("--classes", f.cfg.synth.num_classes, "Number of classes");
    synth->add_option("--docs", f.cfg.synth.num_docs, "Number of documents");
    synth->add_option("--sentences", f.cfg.synth.sentences_per_doc, "Sentences per document");
    synth->add_option("--dim", f.cfg.synth.embedding_dim, "Embedding dimension");
    synth->add_option("--spread", f.cfg.synth.cluster_spread, "Per-component noise standard deviation");
    synth->add_option("--separation", f.cfg.synth.center_separation, "Minimum distance between class centers");
    synth->add_option("--format", f.synth_format, "Embedding file format")->check(CLI::IsMember({"jsonl", "csv"}));
    add_run_flags(*synth, f);

    auto* train_cmd = app.add_subcommand("train", "Train and evaluate on one document split");
    add_input_flags(*train_cmd, f);
    add_run_flags(*train_cmd, f);
    add_train_flags(*train_cmd, f);
    train_cmd->add_option("--ratio", f.cfg.params.train_ratio, "Training share of documents");

    auto* lc = app.add_subcommand("learning-curve", "Add training documents one at a time");
    add_input_flags(*lc, f);
    add_run_flags(*lc, f);
    add_train_flags(*lc, f);
    lc->add_option("--ratio", f.cfg.params.train_ratio, "Training share of documents");
    lc->add_option("--repeats", f.cfg.params.repeats, "Independent document addition orders");

    auto* fv = app.add_subcommand("fold-variance", "Score spread across k document folds");
    add_input_flags(*fv, f);
    add_run_flags(*fv, f);
    add_train_flags(*fv, f);
    fv->add_option("--k", f.cfg.params.folds, "Number of folds");

    auto* ns = app.add_subcommand("noise-sweep", "Corrupt a growing share of training labels");
    add_input_flags(*ns, f);
    add_run_flags(*ns, f);
    add_train_flags(*ns, f);
    ns->add_option("--ratio", f.cfg.params.train_ratio, "Training share of documents");
    ns->add_option("--mode", f.mode, "Corruption mode")->required()->check(CLI::IsMember({"random", "consistent"}));
    ns->add_option("--grid", f.grid, "Corruption fractions, comma separated (default 0 to 1 step 0.05)");

    auto* hom = app.add_subcommand("homogeneity", "Nearest-neighbor label composition per class");
    add_input_flags(*hom, f);
    add_run_flags(*hom, f);
    hom->add_option("--k", f.cfg.k, "Neighbors per sentence");

    auto* rep = app.add_subcommand("replay", "Re-run a command from its manifest");
    rep->add_option("--manifest", f.manifest, "manifest.json written by an earlier run")->required();
    rep->add_option("--out", f.cfg.out_dir, "Output directory");
    rep->add_option("--threads", f.cfg.threads, "Worker threads");

    auto* stats = app.add_subcommand("stats", "Label counts of a dataset");
    stats->add_option("--data", f.cfg.source.data_path, "Dataset file")->required();
    stats->add_option("--labels", f.labels, "Explicit label order, comma separated");
    stats->add_option("--group-size", f.cfg.source.group_size, "Pseudo-document group size");
    stats->add_flag("--json", f.stats_json, "Print JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitArgs;
    }

    try {
        if (stats->parsed()) return print_stats(f);
        if (rep->parsed()) {
            for (const auto& p : replay(f.manifest, f.cfg.out_dir, f.cfg.threads)) std::cout << p.string() << '\n';
            return 0;
        }
        auto& cfg = f.cfg;
        if (!f.labels.empty()) cfg.source.labels = split_list(f.labels);
        if (synth->parsed()) {
            cfg.command = Command::Synth;
            cfg.synth_format = f.synth_format == "csv" ? EmbeddingFormat::Csv : EmbeddingFormat::JsonLines;
        } else if (train_cmd->parsed()) {
            cfg.command = Command::Train;
        } else if (lc->parsed()) {
            cfg.command = Command::LearningCurve;
        } else if (fv->parsed()) {
            cfg.command = Command::FoldVariance;
        } else if (ns->parsed()) {
            cfg.command = Command::NoiseSweep;
            cfg.params.mode = parse_corruption_mode(f.mode);
            if (!f.grid.empty()) cfg.params.grid = parse_grid(f.grid);
        } else {
            cfg.command = Command::Homogeneity;
        }
        if (cfg.command != Command::Synth) cfg.source.validate();
        cfg.train.validate();
        for (const auto& p : execute(cfg)) std::cout << p.string() << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "datasens: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "datasens: " << e.what() << '\n';
        return 1;
    }
}
