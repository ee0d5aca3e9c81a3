#pragma once

// Semantic homogeneity: for each base label, the average label composition
// of every sentence's k nearest neighbors in embedding space.

#include "datasens/embedding.hpp"
#include "datasens/error.hpp"
#include "datasens/format.hpp"
#include "datasens/parallel.hpp"

#include <json.hpp>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace datasens {

struct NeighborhoodProfile {
    std::vector<std::string> labels;
    std::size_t requested_k = 0;
    std::size_t k = 0;  // effective: min(requested_k, n - 1)
    std::vector<std::uint64_t> class_sizes;
    std::vector<std::vector<std::uint64_t>> neighbor_counts;  // pooled tallies [base][neighbor]
    std::vector<std::vector<double>> percent;                 // rows sum to 100 when populated

    std::size_t classes() const noexcept { return labels.size(); }
};

/// Every sentence contributes exactly k neighbors, so the per-sentence mean
/// composition equals pooled counts / (k * class size). Pooling integers
/// keeps the result independent of sentence order.
inline NeighborhoodProfile profile(const EmbeddedDataset& data, std::size_t k = 20,
                                   std::size_t threads = 1) {
    if (data.dataset.empty()) throw Error(ErrorCode::EmptyDataset, "cannot profile an empty dataset");
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
    const auto& sentences = data.dataset.sentences();
    const std::size_t n = sentences.size();
    const std::size_t c = data.dataset.schema().size();

    NeighborhoodProfile p;
    p.labels = data.dataset.schema().labels();
    p.requested_k = k;
    p.k = std::min(k, n - 1);
    p.class_sizes.assign(c, 0);
    p.neighbor_counts.assign(c, std::vector<std::uint64_t>(c, 0));
    p.percent.assign(c, std::vector<double>(c, 0.0));
    for (const auto& s : sentences) ++p.class_sizes[static_cast<std::size_t>(s.label)];
    if (p.k == 0) return p;  // a single sentence has no neighbors

    std::vector<std::uint32_t> tallies(n * c, 0);
    parallel_for(n, threads, [&](std::size_t i) {
        for (auto [row, dist] : knn_rows(data.vectors, i, p.k))
            ++tallies[i * c + static_cast<std::size_t>(sentences[row].label)];
    });
    for (std::size_t i = 0; i < n; ++i) {
        const auto base = static_cast<std::size_t>(sentences[i].label);
        for (std::size_t j = 0; j < c; ++j) p.neighbor_counts[base][j] += tallies[i * c + j];
    }
    for (std::size_t b = 0; b < c; ++b) {
        if (!p.class_sizes[b]) continue;
        const double denom = static_cast<double>(p.k) * static_cast<double>(p.class_sizes[b]);
        for (std::size_t j = 0; j < c; ++j)
            p.percent[b][j] = 100.0 * static_cast<double>(p.neighbor_counts[b][j]) / denom;
    }
    return p;
}

inline double homogeneity_score(const NeighborhoodProfile& p, LabelId label) {
    if (label < 0 || static_cast<std::size_t>(label) >= p.classes())
        throw Error(ErrorCode::UnknownLabel, "label id " + std::to_string(label));
    const auto i = static_cast<std::size_t>(label);
    return p.percent[i][i];
}

inline double homogeneity_score(const NeighborhoodProfile& p, const std::string& label) {
    for (std::size_t i = 0; i < p.labels.size(); ++i)
        if (p.labels[i] == label) return p.percent[i][i];
    throw Error(ErrorCode::UnknownLabel, "label '" + label + "'");
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

} // namespace detail

/// Matrix with a header row and a leading label column.
inline void write_profile_csv(std::ostream& out, const NeighborhoodProfile& p) {
    out << "label";
    for (const auto& l : p.labels) out << ',' << detail::csv_field(l);
    out << '\n';
    for (std::size_t b = 0; b < p.classes(); ++b) {
        out << detail::csv_field(p.labels[b]);
        for (double v : p.percent[b]) out << ',' << fmt::shortest(v);
        out << '\n';
    }
}

inline nlohmann::ordered_json to_json(const NeighborhoodProfile& p) {
    nlohmann::ordered_json j;
    j["k"] = p.k;
    j["requested_k"] = p.requested_k;
    j["labels"] = p.labels;
    j["class_sizes"] = p.class_sizes;
    j["neighbor_counts"] = p.neighbor_counts;
    j["percent"] = p.percent;
    nlohmann::ordered_json scores = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < p.classes(); ++i)
        scores[p.labels[i]] = p.class_sizes[i] ? nlohmann::ordered_json(p.percent[i][i]) : nlohmann::ordered_json();
    j["homogeneity"] = scores;
    return j;
}

} // namespace datasens
