#pragma once

// Sentence embeddings: storage, interchange I/O, attachment to a dataset,
// a hashed bag-of-words fallback featurizer, and exact Euclidean kNN.

#include "datasens/corpus.hpp"
#include "datasens/error.hpp"
#include "datasens/format.hpp"
#include "datasens/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace datasens {

/// Sentence id -> fixed-dimension float vector. Rows keep insertion order.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "dimension must be positive");
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const std::string& id(std::size_t row) const { return ids_.at(row); }

    std::span<const float> row(std::size_t r) const {
        return {data_.data() + r * dim_, dim_};
    }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& id) const { return index_.count(id) != 0; }

    std::span<const float> at(const std::string& id) const {
        if (auto r = find(id)) return row(*r);
        throw Error(ErrorCode::UnknownSentence, "no embedding for '" + id + "'");
    }

    /// The first vector added fixes the dimension of an empty store.
    void add(std::string id, std::span<const float> values) {
        if (values.empty()) throw Error(ErrorCode::DimensionMismatch, "empty vector for '" + id + "'");
        if (dim_ == 0) dim_ = values.size();
        if (values.size() != dim_)
            throw Error(ErrorCode::DimensionMismatch, "'" + id + "' has " +
                                                          std::to_string(values.size()) +
                                                          " components, expected " +
                                                          std::to_string(dim_));
        for (float v : values)
            if (!std::isfinite(v))
                throw Error(ErrorCode::InvalidValue, "non-finite component for '" + id + "'");
        if (index_.count(id)) throw Error(ErrorCode::DuplicateEmbedding, "'" + id + "'");
        index_.emplace(id, ids_.size());
        ids_.push_back(std::move(id));
        data_.insert(data_.end(), values.begin(), values.end());
    }

    /// Rows for `ids`, in that order.
    EmbeddingStore subset(const std::vector<std::string>& ids) const {
        EmbeddingStore out(dim_);
        for (const auto& id : ids) out.add(id, at(id));
        return out;
    }

    /// Free-form header record (for example the encoder version an exporter
    /// used). Carried through writes, not interpreted.
    const nlohmann::json& metadata() const noexcept { return metadata_; }
    void set_metadata(nlohmann::json meta) { metadata_ = std::move(meta); }

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
        return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.data_ == b.data_;
    }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<float> data_;
    std::unordered_map<std::string, std::size_t> index_;
    nlohmann::json metadata_;
};

inline std::uint64_t fingerprint(const EmbeddingStore& store) {
    std::uint64_t h = fnv1a64(std::to_string(store.dim()));
    for (std::size_t r = 0; r < store.size(); ++r) {
        h = fnv1a64(store.id(r) + '\n', h);
        auto v = store.row(r);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float)), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Interchange: newline-delimited {"id": ..., "v": [...]} records, or CSV with
// a header line `id,dim=<d>`. A leading {"meta": {...}} record is accepted.

enum class EmbeddingFormat { JsonLines, Csv };

namespace detail {

inline float parse_component(std::string_view text, std::size_t line) {
    if (auto v = fmt::parse_float(text)) {
        if (!std::isfinite(*v))
            throw Error(ErrorCode::InvalidValue, "line " + std::to_string(line) + ": '" +
                                                     std::string(fmt::trim(text)) + "'");
        return *v;
    }
    // well-formed but outside float range
    std::string owned(fmt::trim(text));
    char* end = nullptr;
    std::strtod(owned.c_str(), &end);
    if (!owned.empty() && end == owned.c_str() + owned.size())
        throw Error(ErrorCode::InvalidValue, "line " + std::to_string(line) + ": '" + owned +
                                                 "' is outside 32-bit range");
    throw MalformedRecordError(line, "not a number: '" + owned + "'");
}

inline bool mentions_non_finite(std::string_view line) {
    return line.find("NaN") != std::string_view::npos ||
           line.find("Infinity") != std::string_view::npos;
}

inline void read_jsonl_row(EmbeddingStore& store, const std::string& line, std::size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::out_of_range&) {
        throw Error(ErrorCode::InvalidValue, "line " + std::to_string(line_no) + ": number out of range");
    } catch (const nlohmann::json::exception& e) {
        // bare NaN/Infinity tokens are not JSON but are common encoder output
        if (mentions_non_finite(line))
            throw Error(ErrorCode::InvalidValue, "line " + std::to_string(line_no) + ": non-finite value");
        throw MalformedRecordError(line_no, e.what());
    }
    if (!obj.is_object()) throw MalformedRecordError(line_no, "record is not an object");
    if (store.empty() && !obj.contains("id") && obj.contains("meta")) {
        store.set_metadata(obj["meta"]);
        return;
    }
    auto id = obj.find("id");
    auto vec = obj.find("v");
    if (id == obj.end() || !id->is_string()) throw MalformedRecordError(line_no, "missing string field 'id'");
    if (vec == obj.end() || !vec->is_array()) throw MalformedRecordError(line_no, "missing list field 'v'");
    std::vector<float> values;
    values.reserve(vec->size());
    for (const auto& x : *vec) {
        if (x.is_number()) {
            const double d = x.get<double>();
            const float f = static_cast<float>(d);
            if (!std::isfinite(f))
                throw Error(ErrorCode::InvalidValue, "line " + std::to_string(line_no) + ": component out of range");
            values.push_back(f);
        } else if (x.is_string()) {
            values.push_back(parse_component(x.get_ref<const std::string&>(), line_no));
        } else {
            throw MalformedRecordError(line_no, "vector component is not a number");
        }
    }
    store.add(id->get<std::string>(), values);
}

inline void read_csv_row(EmbeddingStore& store, std::string_view line, std::size_t line_no) {
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw MalformedRecordError(line_no, "row has no components");
    std::string id(line.substr(0, comma));
    std::vector<float> values;
    std::size_t pos = comma + 1;
    while (true) {
        const auto next = line.find(',', pos);
        values.push_back(parse_component(line.substr(pos, next - pos), line_no));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    store.add(std::move(id), values);
}

} // namespace detail

inline EmbeddingStore read_embeddings(std::istream& in) {
    EmbeddingStore store;
    std::optional<EmbeddingFormat> format;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view body = fmt::trim(line);
        if (body.empty()) continue;
        if (!format) {
            if (body.front() == '{') {
                format = EmbeddingFormat::JsonLines;
            } else if (body.rfind("id,dim=", 0) == 0) {
                format = EmbeddingFormat::Csv;
                const std::string_view d = body.substr(7);
                std::size_t dim = 0;
                auto res = std::from_chars(d.data(), d.data() + d.size(), dim);
                if (res.ec != std::errc() || res.ptr != d.data() + d.size() || dim == 0)
                    throw MalformedRecordError(line_no, "bad CSV header '" + std::string(body) + "'");
                store = EmbeddingStore(dim);
                continue;
            } else {
                throw MalformedRecordError(line_no, "unrecognized embedding format");
            }
        }
        if (*format == EmbeddingFormat::JsonLines) detail::read_jsonl_row(store, line, line_no);
        else detail::read_csv_row(store, body, line_no);
    }
    if (store.empty()) throw Error(ErrorCode::EmptyDataset, "no embedding rows");
    return store;
}

inline EmbeddingStore load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open embeddings '" + path + "'");
    return read_embeddings(in);
}

inline void write_embeddings(std::ostream& out, const EmbeddingStore& store,
                             EmbeddingFormat format = EmbeddingFormat::JsonLines) {
    if (format == EmbeddingFormat::JsonLines) {
        if (!store.metadata().is_null()) {
            nlohmann::ordered_json meta;
            meta["meta"] = store.metadata();
            out << meta.dump() << '\n';
        }
        for (std::size_t r = 0; r < store.size(); ++r) {
            out << "{\"id\":" << nlohmann::json(store.id(r)).dump() << ",\"v\":[";
            auto v = store.row(r);
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out << ',';
                out << fmt::float9(v[i]);
            }
            out << "]}\n";
        }
        return;
    }
    out << "id,dim=" << store.dim() << '\n';
    for (std::size_t r = 0; r < store.size(); ++r) {
        const auto& id = store.id(r);
        if (id.find_first_of(",\n\r") != std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "id '" + id + "' cannot be written as CSV");
        out << id;
        for (float x : store.row(r)) out << ',' << fmt::float9(x);
        out << '\n';
    }
}

inline void save_embeddings(const EmbeddingStore& store, const std::string& path,
                            EmbeddingFormat format = EmbeddingFormat::JsonLines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write embeddings '" + path + "'");
    write_embeddings(out, store, format);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------

class MissingEmbeddingError : public Error {
public:
    explicit MissingEmbeddingError(std::vector<std::string> ids)
        : Error(ErrorCode::MissingEmbedding, describe(ids)), ids_(std::move(ids)) {}

    const std::vector<std::string>& ids() const noexcept { return ids_; }

private:
    static std::string describe(const std::vector<std::string>& ids) {
        std::string msg = std::to_string(ids.size()) + " sentence(s) without a vector:";
        for (std::size_t i = 0; i < ids.size() && i < 10; ++i) msg += " " + ids[i];
        if (ids.size() > 10) msg += " ...";
        return msg;
    }

    std::vector<std::string> ids_;
};

/// A dataset whose sentence i owns row i of `vectors`.
struct EmbeddedDataset {
    Dataset dataset;
    EmbeddingStore vectors;

    std::size_t size() const noexcept { return dataset.size(); }
    std::size_t dim() const noexcept { return vectors.dim(); }

    /// Double-precision feature rows for the given sentence indices.
    Eigen::MatrixXd features(std::span<const std::size_t> rows) const {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto v = vectors.row(rows[i]);
            for (std::size_t j = 0; j < v.size(); ++j)
                x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
        }
        return x;
    }

    std::vector<LabelId> labels(std::span<const std::size_t> rows) const {
        std::vector<LabelId> out;
        out.reserve(rows.size());
        for (auto r : rows) out.push_back(dataset.sentences()[r].label);
        return out;
    }
};

/// Extra vectors in the store are ignored; every sentence needs one.
inline EmbeddedDataset attach(const Dataset& dataset, const EmbeddingStore& store) {
    std::vector<std::string> missing;
    for (const auto& s : dataset.sentences())
        if (!store.contains(s.id)) missing.push_back(s.id);
    if (!missing.empty()) throw MissingEmbeddingError(std::move(missing));
    EmbeddingStore aligned(store.dim());
    for (const auto& s : dataset.sentences()) aligned.add(s.id, store.at(s.id));
    aligned.set_metadata(store.metadata());
    return {dataset, std::move(aligned)};
}

// ---------------------------------------------------------------------------

/// Lowercased tokens: runs of ASCII alphanumerics or non-ASCII bytes.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

/// Signed feature hashing of the token bag, L2-normalized (zero stays zero).
inline std::vector<float> hash_featurize(std::string_view text, std::size_t dim, std::uint64_t seed) {
    if (dim < 8) throw Error(ErrorCode::InvalidArgument, "hash featurizer needs dim >= 8");
    std::vector<double> acc(dim, 0.0);
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = splitmix64(fnv1a64(token) ^ splitmix64(seed));
        const double sign = (h >> 63) ? -1.0 : 1.0;
        acc[(h & 0x7fffffffffffffffULL) % dim] += sign;
    }
    double norm2 = 0.0;
    for (double a : acc) norm2 += a * a;
    std::vector<float> out(dim, 0.0f);
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] * inv);
    }
    return out;
}

inline EmbeddingStore featurize(const Dataset& dataset, std::size_t dim, std::uint64_t seed) {
    EmbeddingStore store(dim);
    for (const auto& s : dataset.sentences()) store.add(s.id, hash_featurize(s.text, dim, seed));
    store.set_metadata({{"featurizer", "hash"}, {"dim", dim}, {"seed", seed}});
    return store;
}

// ---------------------------------------------------------------------------

struct Neighbor {
    std::string id;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct NeighborList {
    std::string query_id;
    std::vector<Neighbor> neighbors;
};

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return sum;
}

/// Row indices of the min(k, n-1) nearest rows to `query_row`, excluding it.
/// Ordered by distance, ties by ascending sentence id.
inline std::vector<std::pair<std::size_t, double>> knn_rows(const EmbeddingStore& store,
                                                            std::size_t query_row, std::size_t k) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    const auto query = store.row(query_row);
    std::vector<std::pair<std::size_t, double>> cand;
    cand.reserve(store.size());
    for (std::size_t r = 0; r < store.size(); ++r)
        if (r != query_row) cand.emplace_back(r, squared_distance(query, store.row(r)));
    const std::size_t take = std::min(k, cand.size());
    auto closer = [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return store.id(a.first) < store.id(b.first);
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(), closer);
    cand.resize(take);
    for (auto& c : cand) c.second = std::sqrt(c.second);
    return cand;
}

inline NeighborList knn(const EmbeddingStore& store, const std::string& query_id, std::size_t k) {
    auto row = store.find(query_id);
    if (!row) throw Error(ErrorCode::UnknownSentence, "'" + query_id + "'");
    NeighborList out{query_id, {}};
    for (auto [r, d] : knn_rows(store, *row, k)) out.neighbors.push_back({store.id(r), d});
    return out;
}

} // namespace datasens
