#pragma once

// Seeded synthetic corpora with clustered embeddings, for desk-scale runs
// that need no external data.

#include "datasens/corpus.hpp"
#include "datasens/embedding.hpp"
#include "datasens/random.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace datasens {

struct SyntheticSpec {
    std::size_t num_classes = 3;
    std::size_t num_docs = 30;
    std::size_t sentences_per_doc = 20;
    std::size_t embedding_dim = 16;
    double cluster_spread = 0.1;     // per-component noise standard deviation
    double center_separation = 5.0;  // minimum pairwise distance of class centers
};

namespace detail {

inline std::string padded(std::size_t value, std::size_t width) {
    std::string s = std::to_string(value);
    return std::string(s.size() < width ? width - s.size() : 0, '0') + s;
}

/// Centers with pairwise distance >= separation. With enough dimensions they
/// sit on scaled axes (all pairwise distances exactly `separation`).
inline std::vector<std::vector<double>> class_centers(const SyntheticSpec& spec, Rng& rng) {
    const std::size_t c = spec.num_classes, d = spec.embedding_dim;
    std::vector<std::vector<double>> centers(c, std::vector<double>(d, 0.0));
    if (c <= d) {
        const double scale = spec.center_separation / std::sqrt(2.0);
        for (std::size_t i = 0; i < c; ++i) centers[i][i] = scale;
        return centers;
    }
    double side = spec.center_separation * static_cast<double>(c);
    for (std::size_t placed = 0; placed < c;) {
        for (std::size_t attempt = 0; attempt < 10000 && placed < c; ++attempt) {
            std::vector<double> p(d);
            for (auto& x : p) x = rng.uniform(-side, side);
            bool ok = true;
            for (std::size_t j = 0; j < placed && ok; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < d; ++t) s += (p[t] - centers[j][t]) * (p[t] - centers[j][t]);
                ok = std::sqrt(s) >= spec.center_separation;
            }
            if (ok) centers[placed++] = std::move(p);
        }
        side *= 2.0;
    }
    return centers;
}

} // namespace detail

/// Labels rotate through the classes within each document (offset by the
/// document index); each vector is its class center plus isotropic Gaussian
/// noise. Sentence text mixes class-specific and shared words so the hash
/// featurizer also separates classes.
inline std::pair<Dataset, EmbeddingStore> generate_synthetic(const SyntheticSpec& spec,
                                                            std::uint64_t seed) {
    if (spec.num_classes < 2 || spec.num_docs == 0 || spec.sentences_per_doc == 0)
        throw Error(ErrorCode::InvalidArgument, "synthetic corpus needs >= 2 classes and positive counts");
    if (spec.embedding_dim < 2) throw Error(ErrorCode::InvalidArgument, "embedding dim must be >= 2");
    if (!(spec.cluster_spread >= 0.0) || !(spec.center_separation > 0.0))
        throw Error(ErrorCode::InvalidArgument, "spread must be >= 0 and separation > 0");

    Rng center_rng(derive_seed(seed, "synthetic/centers"));
    Rng noise_rng(derive_seed(seed, "synthetic/noise"));
    Rng text_rng(derive_seed(seed, "synthetic/text"));
    const auto centers = detail::class_centers(spec, center_rng);

    std::vector<std::string> labels;
    for (std::size_t c = 0; c < spec.num_classes; ++c) labels.push_back("class-" + std::to_string(c));

    const std::size_t doc_width = std::to_string(spec.num_docs).size();
    const std::size_t sent_width = std::to_string(spec.sentences_per_doc).size();
    std::vector<Sentence> sentences;
    EmbeddingStore store(spec.embedding_dim);
    std::vector<float> v(spec.embedding_dim);
    for (std::size_t d = 0; d < spec.num_docs; ++d) {
        const std::string doc = "doc-" + detail::padded(d, doc_width);
        for (std::size_t j = 0; j < spec.sentences_per_doc; ++j) {
            const std::size_t label = (d + j) % spec.num_classes;
            std::string text;
            for (int w = 0; w < 8; ++w) {
                if (w) text += ' ';
                if (text_rng.uniform() < 0.6)
                    text += "c" + std::to_string(label) + "w" + std::to_string(text_rng.below(12));
                else
                    text += "w" + std::to_string(text_rng.below(40));
            }
            Sentence s{doc + "-s" + detail::padded(j, sent_width), doc, std::move(text),
                       static_cast<LabelId>(label)};
            for (std::size_t t = 0; t < spec.embedding_dim; ++t)
                v[t] = static_cast<float>(centers[label][t] + spec.cluster_spread * noise_rng.normal());
            store.add(s.id, v);
            sentences.push_back(std::move(s));
        }
    }
    return {Dataset(LabelSchema(std::move(labels)), std::move(sentences)), std::move(store)};
}

} // namespace datasens
