#pragma once

// Labeled sentence corpora: schema, dataset, interchange I/O, document
// grouping and document-level splits/folds.

#include "datasens/error.hpp"
#include "datasens/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace datasens {

using LabelId = int;

/// Ordered label names. The order is the load order and drives the
/// consistent-corruption map, so it must be stable across runs.
class LabelSchema {
public:
    LabelSchema() = default;

    explicit LabelSchema(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.size() < 2)
            throw Error(ErrorCode::InvalidSchema, "schema needs at least 2 labels, got " +
                                                      std::to_string(labels_.size()));
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].empty()) throw Error(ErrorCode::InvalidSchema, "empty label name");
            if (!index_.emplace(labels_[i], static_cast<LabelId>(i)).second)
                throw Error(ErrorCode::InvalidSchema, "duplicate label '" + labels_[i] + "'");
        }
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& name(LabelId id) const { return labels_.at(static_cast<std::size_t>(id)); }

    std::optional<LabelId> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    LabelId id(const std::string& name) const {
        if (auto found = find(name)) return *found;
        throw Error(ErrorCode::UnknownLabel, "label '" + name + "' is not in the schema");
    }

    bool contains(LabelId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < labels_.size();
    }

    friend bool operator==(const LabelSchema& a, const LabelSchema& b) {
        return a.labels_ == b.labels_;
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, LabelId> index_;
};

struct Sentence {
    std::string id;
    std::string document_id;
    std::string text;
    LabelId label = 0;

    friend bool operator==(const Sentence&, const Sentence&) = default;
};

class Dataset {
public:
    Dataset() = default;

    /// Documents are listed in order of first appearance.
    Dataset(LabelSchema schema, std::vector<Sentence> sentences)
        : schema_(std::move(schema)), sentences_(std::move(sentences)) {
        std::unordered_set<std::string> seen;
        for (const auto& s : sentences_)
            if (seen.insert(s.document_id).second) documents_.push_back(s.document_id);
        validate();
    }

    Dataset(LabelSchema schema, std::vector<Sentence> sentences, std::vector<std::string> documents)
        : schema_(std::move(schema)), sentences_(std::move(sentences)),
          documents_(std::move(documents)) {
        validate();
    }

    const LabelSchema& schema() const noexcept { return schema_; }
    const std::vector<Sentence>& sentences() const noexcept { return sentences_; }
    const std::vector<std::string>& documents() const noexcept { return documents_; }
    std::size_t size() const noexcept { return sentences_.size(); }
    bool empty() const noexcept { return sentences_.empty(); }

    std::vector<std::size_t> label_counts() const {
        std::vector<std::size_t> counts(schema_.size(), 0);
        for (const auto& s : sentences_) ++counts[static_cast<std::size_t>(s.label)];
        return counts;
    }

    /// Indices (in dataset order) of the sentences belonging to any of `docs`.
    std::vector<std::size_t> sentences_in(const std::vector<std::string>& docs) const {
        std::unordered_set<std::string> wanted(docs.begin(), docs.end());
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < sentences_.size(); ++i)
            if (wanted.count(sentences_[i].document_id)) out.push_back(i);
        return out;
    }

    friend bool operator==(const Dataset& a, const Dataset& b) {
        return a.schema_ == b.schema_ && a.sentences_ == b.sentences_ &&
               a.documents_ == b.documents_;
    }

private:
    void validate() const {
        std::unordered_set<std::string> docs;
        for (const auto& d : documents_)
            if (!docs.insert(d).second)
                throw Error(ErrorCode::InvalidArgument, "duplicate document id '" + d + "'");
        std::unordered_set<std::string> ids;
        for (const auto& s : sentences_) {
            if (!schema_.contains(s.label))
                throw Error(ErrorCode::LabelRangeError,
                            "sentence '" + s.id + "' has label id " + std::to_string(s.label));
            if (!ids.insert(s.id).second)
                throw Error(ErrorCode::DuplicateSentence, "sentence id '" + s.id + "'");
            if (!docs.count(s.document_id))
                throw Error(ErrorCode::InvalidArgument,
                            "document '" + s.document_id + "' missing from document list");
        }
    }

    LabelSchema schema_;
    std::vector<Sentence> sentences_;
    std::vector<std::string> documents_;
};

// ---------------------------------------------------------------------------
// Interchange format: one JSON object per line with string fields
// id, doc, text, label. An optional first line {"schema": [...]} fixes the
// label order.

namespace detail {

inline const std::string& string_field(const nlohmann::json& obj, const char* key,
                                       std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw MalformedRecordError(line, std::string("missing field '") + key + "'");
    if (!it->is_string())
        throw MalformedRecordError(line, std::string("field '") + key + "' is not a string");
    return it->get_ref<const std::string&>();
}

} // namespace detail

/// Reads the interchange format. `explicit_labels` overrides any schema
/// header line; without either, label order is first appearance.
inline Dataset read_dataset(std::istream& in,
                            const std::optional<std::vector<std::string>>& explicit_labels = {}) {
    struct Raw {
        std::string id, doc, text, label;
        std::size_t line;
    };
    std::vector<Raw> records;
    std::optional<std::vector<std::string>> header_labels;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecordError(line_no, e.what());
        }
        if (!obj.is_object()) throw MalformedRecordError(line_no, "record is not an object");
        if (records.empty() && !header_labels && obj.contains("schema")) {
            const auto& arr = obj["schema"];
            if (!arr.is_array()) throw MalformedRecordError(line_no, "schema is not a list");
            std::vector<std::string> names;
            for (const auto& v : arr) {
                if (!v.is_string()) throw MalformedRecordError(line_no, "schema entry is not a string");
                names.push_back(v.get<std::string>());
            }
            header_labels = std::move(names);
            continue;
        }
        records.push_back({detail::string_field(obj, "id", line_no),
                           detail::string_field(obj, "doc", line_no),
                           detail::string_field(obj, "text", line_no),
                           detail::string_field(obj, "label", line_no), line_no});
    }
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "no records");

    std::optional<LabelSchema> schema;
    if (explicit_labels) schema.emplace(*explicit_labels);
    else if (header_labels) schema.emplace(*header_labels);
    else {
        std::vector<std::string> order;
        std::unordered_set<std::string> seen;
        for (const auto& r : records)
            if (seen.insert(r.label).second) order.push_back(r.label);
        schema.emplace(std::move(order));
    }

    std::vector<Sentence> sentences;
    sentences.reserve(records.size());
    std::unordered_set<std::string> ids;
    for (auto& r : records) {
        auto label = schema->find(r.label);
        if (!label)
            throw Error(ErrorCode::UnknownLabel,
                        "line " + std::to_string(r.line) + ": label '" + r.label + "'");
        if (!ids.insert(r.id).second)
            throw Error(ErrorCode::DuplicateSentence,
                        "line " + std::to_string(r.line) + ": sentence id '" + r.id + "'");
        sentences.push_back({std::move(r.id), std::move(r.doc), std::move(r.text), *label});
    }
    return Dataset(std::move(*schema), std::move(sentences));
}

inline Dataset load_dataset(const std::string& path,
                            const std::optional<std::vector<std::string>>& explicit_labels = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open dataset '" + path + "'");
    return read_dataset(in, explicit_labels);
}

/// Writes the schema header line followed by one record per sentence.
/// Documents are implied by first appearance, so a dataset whose document
/// list is not in first-appearance order will not round-trip that order.
inline void write_dataset(std::ostream& out, const Dataset& dataset) {
    nlohmann::ordered_json header;
    header["schema"] = dataset.schema().labels();
    out << header.dump() << '\n';
    for (const auto& s : dataset.sentences()) {
        nlohmann::ordered_json rec;
        rec["id"] = s.id;
        rec["doc"] = s.document_id;
        rec["text"] = s.text;
        rec["label"] = dataset.schema().name(s.label);
        out << rec.dump() << '\n';
    }
}

inline void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write dataset '" + path + "'");
    write_dataset(out, dataset);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

/// Content hash over schema, document order and sentences.
inline std::uint64_t fingerprint(const Dataset& dataset) {
    std::ostringstream os;
    write_dataset(os, dataset);
    std::uint64_t h = fnv1a64(os.str());
    for (const auto& d : dataset.documents()) h = fnv1a64(d + '\n', h);
    return h;
}

// ---------------------------------------------------------------------------

/// Replaces the document structure with consecutive groups of `group_size`
/// original documents (input order); the last group may be smaller.
inline Dataset group_pseudo_documents(const Dataset& dataset, std::size_t group_size) {
    if (group_size == 0) throw Error(ErrorCode::InvalidGroupSize, "group size must be positive");
    if (group_size == 1) return dataset;

    const auto& docs = dataset.documents();
    const std::size_t groups = (docs.size() + group_size - 1) / group_size;
    const std::size_t width = std::to_string(groups).size();
    std::unordered_map<std::string, std::string> group_of;
    std::vector<std::string> group_ids;
    for (std::size_t g = 0; g < groups; ++g) {
        std::string idx = std::to_string(g + 1);
        group_ids.push_back("group-" + std::string(width - idx.size(), '0') + idx);
    }
    for (std::size_t i = 0; i < docs.size(); ++i) group_of[docs[i]] = group_ids[i / group_size];

    std::vector<Sentence> sentences = dataset.sentences();
    for (auto& s : sentences) s.document_id = group_of.at(s.document_id);
    return Dataset(dataset.schema(), std::move(sentences), std::move(group_ids));
}

struct DocumentSplit {
    std::vector<std::string> train_docs;
    std::vector<std::string> test_docs;
    std::uint64_t seed = 0;
};

/// Seeded document permutation; the first round(ratio * n) documents train.
/// Train size is capped at n - 1 so the test side is never empty.
inline DocumentSplit split_documents(const Dataset& dataset, double train_ratio, std::uint64_t seed) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
        throw Error(ErrorCode::InvalidArgument, "train ratio must lie in (0, 1)");
    const std::size_t n = dataset.documents().size();
    if (n < 2) throw Error(ErrorCode::DegenerateSplit, "need at least 2 documents to split");

    std::size_t n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
    n_train = std::min(n_train, n - 1);
    if (n_train == 0) throw Error(ErrorCode::DegenerateSplit, "training side would be empty");

    std::vector<std::string> docs = dataset.documents();
    Rng rng(seed);
    rng.shuffle(docs);
    DocumentSplit split;
    split.seed = seed;
    split.train_docs.assign(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test_docs.assign(docs.begin() + static_cast<std::ptrdiff_t>(n_train), docs.end());
    return split;
}

struct FoldPlan {
    std::vector<std::vector<std::string>> folds;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return folds.size(); }

    /// Every document outside fold `held_out`, in fold order.
    std::vector<std::string> complement(std::size_t held_out) const {
        std::vector<std::string> out;
        for (std::size_t f = 0; f < folds.size(); ++f)
            if (f != held_out) out.insert(out.end(), folds[f].begin(), folds[f].end());
        return out;
    }
};

/// Deals a seeded document permutation round-robin into k folds.
inline FoldPlan make_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    const std::size_t n = dataset.documents().size();
    if (k > n)
        throw Error(ErrorCode::TooManyFolds,
                    std::to_string(k) + " folds for " + std::to_string(n) + " documents");
    std::vector<std::string> docs = dataset.documents();
    Rng rng(seed);
    rng.shuffle(docs);
    FoldPlan plan;
    plan.seed = seed;
    plan.folds.resize(k);
    for (std::size_t i = 0; i < n; ++i) plan.folds[i % k].push_back(std::move(docs[i]));
    return plan;
}

} // namespace datasens
