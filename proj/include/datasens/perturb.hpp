#pragma once

// Training-label corruption: random incorrect relabeling and consistent
// relabeling through the fixed cyclic map i -> (i - 1) mod C. Both modes pick
// the same positions for the same (n, fraction, seed).

#include "datasens/corpus.hpp"
#include "datasens/error.hpp"
#include "datasens/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace datasens {

enum class CorruptionMode { Random, Consistent };

constexpr std::string_view to_string(CorruptionMode mode) {
    return mode == CorruptionMode::Random ? "random" : "consistent";
}

inline CorruptionMode parse_corruption_mode(std::string_view s) {
    if (s == "random") return CorruptionMode::Random;
    if (s == "consistent") return CorruptionMode::Consistent;
    throw Error(ErrorCode::InvalidArgument, "corruption mode must be 'random' or 'consistent'");
}

/// The consistent map: the first label becomes the last, every other label
/// becomes its predecessor.
constexpr LabelId consistent_target(LabelId label, std::size_t classes) {
    const auto c = static_cast<LabelId>(classes);
    return (label - 1 + c) % c;
}

struct CorruptionPlan {
    CorruptionMode mode = CorruptionMode::Random;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    std::vector<LabelId> mapping;  // consistent mode only

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["mode"] = std::string(to_string(mode));
        j["fraction"] = fraction;
        j["seed"] = seed;
        if (mode == CorruptionMode::Consistent) j["mapping"] = mapping;
        return j;
    }
};

inline CorruptionPlan make_plan(CorruptionMode mode, double fraction, std::size_t classes,
                                std::uint64_t seed) {
    CorruptionPlan plan{mode, fraction, seed, {}};
    if (mode == CorruptionMode::Consistent)
        for (std::size_t i = 0; i < classes; ++i)
            plan.mapping.push_back(consistent_target(static_cast<LabelId>(i), classes));
    return plan;
}

namespace detail {

inline void check_corruption_args(std::span<const LabelId> labels, double fraction, std::size_t classes) {
    if (classes < 2) throw Error(ErrorCode::InvalidSchema, "corruption needs at least 2 classes");
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "corruption fraction must lie in [0, 1]");
    for (LabelId l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= classes)
            throw Error(ErrorCode::LabelRangeError, "label id " + std::to_string(l));
}

} // namespace detail

/// Sorted positions of a seeded uniform sample of round(fraction * n)
/// indices, drawn without replacement.
inline std::vector<std::size_t> select_positions(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "corruption fraction must lie in [0, 1]");
    const auto count = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    Rng rng(derive_seed(seed, "perturb/select"));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // partial Fisher-Yates: the first `count` slots are the sample
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::vector<LabelId> corrupt_random(std::span<const LabelId> labels, double fraction,
                                           std::size_t classes, std::uint64_t seed) {
    detail::check_corruption_args(labels, fraction, classes);
    std::vector<LabelId> out(labels.begin(), labels.end());
    Rng rng(derive_seed(seed, "perturb/replace"));
    for (auto pos : select_positions(labels.size(), fraction, seed)) {
        // uniform over the C - 1 labels other than the original
        const auto r = static_cast<LabelId>(rng.below(classes - 1));
        out[pos] = r < labels[pos] ? r : r + 1;
    }
    return out;
}

inline std::vector<LabelId> corrupt_consistent(std::span<const LabelId> labels, double fraction,
                                               std::size_t classes, std::uint64_t seed) {
    detail::check_corruption_args(labels, fraction, classes);
    std::vector<LabelId> out(labels.begin(), labels.end());
    for (auto pos : select_positions(labels.size(), fraction, seed))
        out[pos] = consistent_target(labels[pos], classes);
    return out;
}

inline std::vector<LabelId> corrupt_consistent(std::span<const LabelId> labels, double fraction,
                                               const LabelSchema& schema, std::uint64_t seed) {
    return corrupt_consistent(labels, fraction, schema.size(), seed);
}

inline std::vector<LabelId> corrupt(std::span<const LabelId> labels, const CorruptionPlan& plan,
                                    std::size_t classes) {
    return plan.mode == CorruptionMode::Random
               ? corrupt_random(labels, plan.fraction, classes, plan.seed)
               : corrupt_consistent(labels, plan.fraction, classes, plan.seed);
}

} // namespace datasens
