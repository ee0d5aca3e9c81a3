#pragma once

#include "datasens/corpus.hpp"
#include "datasens/error.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace datasens {

/// Rows are gold labels, columns are predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const noexcept { return classes_; }

    std::uint64_t operator()(std::size_t gold, std::size_t pred) const {
        return counts_[gold * classes_ + pred];
    }
    std::uint64_t& operator()(std::size_t gold, std::size_t pred) {
        return counts_[gold * classes_ + pred];
    }

    std::uint64_t row_sum(std::size_t gold) const {
        std::uint64_t s = 0;
        for (std::size_t p = 0; p < classes_; ++p) s += (*this)(gold, p);
        return s;
    }
    std::uint64_t col_sum(std::size_t pred) const {
        std::uint64_t s = 0;
        for (std::size_t g = 0; g < classes_; ++g) s += (*this)(g, pred);
        return s;
    }
    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto c : counts_) s += c;
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const LabelId> gold, std::span<const LabelId> pred,
                                 std::size_t classes) {
    if (gold.size() != pred.size())
        throw Error(ErrorCode::ShapeError, "gold and predicted lengths differ");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] < 0 || pred[i] < 0 || static_cast<std::size_t>(gold[i]) >= classes ||
            static_cast<std::size_t>(pred[i]) >= classes)
            throw Error(ErrorCode::LabelRangeError, "label id outside [0, " + std::to_string(classes) + ")");
        ++m(static_cast<std::size_t>(gold[i]), static_cast<std::size_t>(pred[i]));
    }
    return m;
}

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;

    friend bool operator==(const ClassScore&, const ClassScore&) = default;
};

struct LabelScores {
    std::vector<ClassScore> per_label;
    double weighted_f1 = 0.0;  // 0 when nothing was evaluated

    std::uint64_t total_support() const {
        std::uint64_t s = 0;
        for (const auto& c : per_label) s += c.support;
        return s;
    }

    friend bool operator==(const LabelScores&, const LabelScores&) = default;
};

/// Support-weighted mean of per-label F1; zero-support labels weigh nothing.
inline double weighted_avg_f1(const std::vector<ClassScore>& scores) {
    double num = 0.0;
    std::uint64_t den = 0;
    for (const auto& s : scores) {
        num += static_cast<double>(s.support) * s.f1;
        den += s.support;
    }
    if (den == 0) throw Error(ErrorCode::EmptyEvaluation, "total support is zero");
    return num / static_cast<double>(den);
}

inline double weighted_avg_f1(const LabelScores& scores) { return weighted_avg_f1(scores.per_label); }

/// precision = diag/colsum, recall = diag/rowsum, f1 = 2PR/(P+R); 0/0 -> 0.
inline LabelScores per_label_scores(const ConfusionMatrix& m) {
    LabelScores out;
    out.per_label.resize(m.classes());
    for (std::size_t c = 0; c < m.classes(); ++c) {
        auto& s = out.per_label[c];
        const auto tp = static_cast<double>(m(c, c));
        const auto predicted = m.col_sum(c);
        s.support = m.row_sum(c);
        s.precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
        const double pr = s.precision + s.recall;
        s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    }
    if (out.total_support() > 0) out.weighted_f1 = weighted_avg_f1(out.per_label);
    return out;
}

inline LabelScores evaluate(std::span<const LabelId> gold, std::span<const LabelId> pred,
                            std::size_t classes) {
    return per_label_scores(confusion(gold, pred, classes));
}

} // namespace datasens
