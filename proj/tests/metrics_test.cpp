#include "datasens/metrics.hpp"
#include "datasens/random.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace datasens;

namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionMatrix m(rows.size());
    for (std::size_t g = 0; g < rows.size(); ++g)
        for (std::size_t p = 0; p < rows.size(); ++p) m(g, p) = rows[g][p];
    return m;
}

} // namespace

TEST(Confusion, HandTally) {
    std::vector<LabelId> gold{0, 0, 1, 1}, pred{0, 1, 1, 1};
    auto m = confusion(gold, pred, 2);
    EXPECT_EQ(m, from_rows({{1, 1}, {0, 2}}));
    EXPECT_EQ(m.total(), 4u);
    EXPECT_EQ(m.row_sum(1), 2u);
    EXPECT_EQ(m.col_sum(1), 3u);
}

TEST(Confusion, IdentityIsDiagonal) {
    std::vector<LabelId> g{2, 0, 1, 2, 2};
    auto m = confusion(g, g, 3);
    EXPECT_EQ(m, from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 3}}));
}

TEST(Confusion, Errors) {
    std::vector<LabelId> a{0, 1}, b{0};
    try {
        confusion(a, b, 2);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ShapeError);
    }
    std::vector<LabelId> c{0, 2};
    EXPECT_THROW(confusion(a, c, 2), Error);
}

TEST(Scores, HandComputation) {
    auto s = per_label_scores(from_rows({{2, 0}, {1, 1}}));
    EXPECT_DOUBLE_EQ(s.per_label[0].precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.per_label[0].recall, 1.0);
    EXPECT_DOUBLE_EQ(s.per_label[0].f1, 0.8);
    EXPECT_DOUBLE_EQ(s.per_label[1].precision, 1.0);
    EXPECT_DOUBLE_EQ(s.per_label[1].recall, 0.5);
    EXPECT_DOUBLE_EQ(s.per_label[1].f1, 2.0 / 3.0);
    EXPECT_EQ(s.per_label[0].support, 2u);
    EXPECT_EQ(s.total_support(), 4u);
}

TEST(Scores, PerfectAndAbsentClass) {
    auto s = per_label_scores(from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 0}}));
    for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(s.per_label[c].f1, 1.0);
        EXPECT_EQ(s.per_label[c].precision, 1.0);
    }
    EXPECT_EQ(s.per_label[2], (ClassScore{0.0, 0.0, 0.0, 0}));
    EXPECT_EQ(s.weighted_f1, 1.0);
}

TEST(WeightedF1, HandArithmetic) {
    std::vector<ClassScore> s{{0, 0, 0.5, 3}, {0, 0, 1.0, 1}};
    EXPECT_DOUBLE_EQ(weighted_avg_f1(s), 0.625);
    std::vector<ClassScore> flat{{0, 0, 0.3, 5}, {0, 0, 0.3, 2}, {0, 0, 0.9, 0}};
    EXPECT_DOUBLE_EQ(weighted_avg_f1(flat), 0.3);
    try {
        weighted_avg_f1(std::vector<ClassScore>{{0, 0, 1, 0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyEvaluation);
    }
}

TEST(Scores, MatchLoopOracleAndStayInRange) {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng.below(6);
        std::vector<std::vector<std::uint64_t>> rows(c, std::vector<std::uint64_t>(c));
        for (auto& r : rows)
            for (auto& v : r) v = rng.below(4) == 0 ? 0 : rng.below(50);
        rows[0][0] += 1;
        auto got = per_label_scores(from_rows(rows));
        auto want = oracle::per_label(rows);
        double lo = 1.0, hi = 0.0;
        for (std::size_t l = 0; l < c; ++l) {
            EXPECT_NEAR(got.per_label[l].precision, want[l].precision, 1e-12);
            EXPECT_NEAR(got.per_label[l].recall, want[l].recall, 1e-12);
            EXPECT_NEAR(got.per_label[l].f1, want[l].f1, 1e-12);
            EXPECT_EQ(got.per_label[l].support, want[l].support);
            EXPECT_GE(got.per_label[l].f1, 0.0);
            EXPECT_LE(got.per_label[l].f1, 1.0);
            if (want[l].support) {
                lo = std::min(lo, want[l].f1);
                hi = std::max(hi, want[l].f1);
            }
        }
        EXPECT_NEAR(got.weighted_f1, oracle::weighted_f1(want), 1e-12);
        EXPECT_GE(got.weighted_f1, lo - 1e-12);
        EXPECT_LE(got.weighted_f1, hi + 1e-12);
    }
}

TEST(Evaluate, EmptyInputHasZeroSupport) {
    std::vector<LabelId> none;
    auto s = evaluate(none, none, 3);
    EXPECT_EQ(s.total_support(), 0u);
    EXPECT_EQ(s.weighted_f1, 0.0);
}
