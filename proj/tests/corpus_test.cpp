#include "datasens/corpus.hpp"
#include "datasens/embedding.hpp"
#include "datasens/synthetic.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

using namespace datasens;

namespace {

Dataset parse(const std::string& text, std::optional<std::vector<std::string>> labels = {}) {
    std::istringstream in(text);
    return read_dataset(in, labels);
}

const std::vector<std::string> kBvaLabels = {"Other", "Finding", "Evidence", "Rule", "Citation", "Reasoning"};

} // namespace

TEST(LabelSchema, RejectsDuplicatesEmptyNamesAndSingleLabel) {
    EXPECT_THROW(LabelSchema({"a", "a"}), Error);
    EXPECT_THROW(LabelSchema({"a", ""}), Error);
    try {
        LabelSchema({"only"});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidSchema);
    }
    LabelSchema s({"x", "y", "z"});
    EXPECT_EQ(s.id("z"), 2);
    EXPECT_FALSE(s.find("w"));
}

TEST(LoadDataset, InfersFirstAppearanceOrder) {
    auto ds = parse(R"({"id":"1","doc":"A","text":"t","label":"Rule"}
{"id":"2","doc":"B","text":"t","label":"Other"}
{"id":"3","doc":"A","text":"t","label":"Rule"}
)");
    EXPECT_EQ(ds.schema().labels(), (std::vector<std::string>{"Rule", "Other"}));
    EXPECT_EQ(ds.documents(), (std::vector<std::string>{"A", "B"}));
    EXPECT_EQ(ds.label_counts(), (std::vector<std::size_t>{2, 1}));
}

TEST(LoadDataset, HeaderLineAndExplicitSchema) {
    const std::string text = R"({"schema":["Other","Rule","Extra"]}
{"id":"1","doc":"A","text":"t","label":"Rule"}
{"id":"2","doc":"A","text":"t","label":"Other"}
)";
    EXPECT_EQ(parse(text).schema().labels(), (std::vector<std::string>{"Other", "Rule", "Extra"}));
    // an explicit list takes precedence over the header line
    EXPECT_EQ(parse(text, std::vector<std::string>{"Rule", "Other"}).schema().labels(),
              (std::vector<std::string>{"Rule", "Other"}));
}

TEST(LoadDataset, EmptyFileIsEmptyDataset) {
    try {
        parse("\n\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDataset);
    }
}

TEST(LoadDataset, MissingFieldReportsLine) {
    try {
        parse("{\"id\":\"1\",\"doc\":\"A\",\"text\":\"t\",\"label\":\"x\"}\n"
              "{\"id\":\"2\",\"doc\":\"A\",\"label\":\"y\"}\n");
        FAIL();
    } catch (const MalformedRecordError& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(parse("not json\n"), MalformedRecordError);
    EXPECT_THROW(parse("{\"id\":1,\"doc\":\"A\",\"text\":\"t\",\"label\":\"x\"}\n"), MalformedRecordError);
}

TEST(LoadDataset, UnknownLabelUnderExplicitSchema) {
    try {
        parse(R"({"id":"1","doc":"A","text":"t","label":"Foo"})", kBvaLabels);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownLabel);
    }
}

TEST(LoadDataset, DuplicateSentenceId) {
    try {
        parse("{\"id\":\"1\",\"doc\":\"A\",\"text\":\"t\",\"label\":\"x\"}\n"
              "{\"id\":\"1\",\"doc\":\"B\",\"text\":\"t\",\"label\":\"y\"}\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DuplicateSentence);
    }
}

TEST(LoadDataset, MissingFileIsIoError) {
    try {
        load_dataset("/nonexistent/data.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::Io);
    }
}

TEST(LoadDataset, SerializationRoundTrips) {
    auto [ds, store] = generate_synthetic({4, 5, 3, 8, 0.5, 2.0}, 11);
    std::ostringstream out;
    write_dataset(out, ds);
    std::istringstream in(out.str());
    EXPECT_EQ(read_dataset(in), ds);

    // unicode text survives
    auto u = parse(R"({"id":"é1","doc":"D","text":"Veteran’s claim «granted»","label":"x"}
{"id":"é2","doc":"D","text":"","label":"y"})");
    std::ostringstream out2;
    write_dataset(out2, u);
    std::istringstream in2(out2.str());
    EXPECT_EQ(read_dataset(in2), u);
}

TEST(GroupPseudoDocuments, CeilingDivision) {
    auto ds = testutil::make_dataset(25, 1);
    auto g = group_pseudo_documents(ds, 10);
    ASSERT_EQ(g.documents().size(), 3u);
    std::vector<std::size_t> sizes;
    for (const auto& d : g.documents()) sizes.push_back(g.sentences_in({d}).size());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{10, 10, 5}));
}

TEST(GroupPseudoDocuments, ThreeHundredSeventyCasesMakeThirtySeven) {
    auto ds = testutil::make_dataset(370, 1, 4);
    EXPECT_EQ(group_pseudo_documents(ds, 10).documents().size(), 37u);
}

TEST(GroupPseudoDocuments, PreservesSentencesAndCounts) {
    auto ds = testutil::make_dataset(23, 3);
    auto g = group_pseudo_documents(ds, 4);
    ASSERT_EQ(g.size(), ds.size());
    EXPECT_EQ(g.label_counts(), ds.label_counts());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(g.sentences()[i].id, ds.sentences()[i].id);
        EXPECT_EQ(g.sentences()[i].label, ds.sentences()[i].label);
    }
    // consecutive original documents share a group
    EXPECT_EQ(g.sentences()[0].document_id, g.sentences()[3 * 3].document_id);
    EXPECT_NE(g.sentences()[0].document_id, g.sentences()[3 * 4].document_id);
}

TEST(GroupPseudoDocuments, IdentityAndZero) {
    auto ds = testutil::make_dataset(5, 2);
    EXPECT_EQ(group_pseudo_documents(ds, 1), ds);
    try {
        group_pseudo_documents(ds, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGroupSize);
    }
}

TEST(SplitDocuments, EightyTwenty) {
    auto ds = testutil::make_dataset(50, 2);
    auto s = split_documents(ds, 0.8, 3);
    EXPECT_EQ(s.train_docs.size(), 40u);
    EXPECT_EQ(s.test_docs.size(), 10u);
    auto again = split_documents(ds, 0.8, 3);
    EXPECT_EQ(s.train_docs, again.train_docs);
    EXPECT_EQ(s.test_docs, again.test_docs);
    EXPECT_NE(split_documents(ds, 0.8, 4).test_docs, s.test_docs);
}

TEST(SplitDocuments, NinetyNinePercentKeepsOneTestDocument) {
    // 0.99 * 50 = 49.5 rounds to 50; the guard caps training at n - 1
    auto s = split_documents(testutil::make_dataset(50, 1), 0.99, 1);
    EXPECT_EQ(s.train_docs.size(), 49u);
    EXPECT_EQ(s.test_docs.size(), 1u);
}

TEST(SplitDocuments, DegenerateCases) {
    auto code = [](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoFailure;
    };
    EXPECT_EQ(code([] { split_documents(testutil::make_dataset(1, 3), 0.8, 0); }), ErrorCode::DegenerateSplit);
    EXPECT_EQ(code([] { split_documents(testutil::make_dataset(10, 1), 0.01, 0); }), ErrorCode::DegenerateSplit);
    EXPECT_EQ(code([] { split_documents(testutil::make_dataset(10, 1), 1.0, 0); }), ErrorCode::InvalidArgument);
}

TEST(SplitDocuments, PartitionPropertyAcrossSeeds) {
    auto ds = testutil::make_dataset(17, 2);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto s = split_documents(ds, 0.7, seed);
        std::set<std::string> train(s.train_docs.begin(), s.train_docs.end());
        std::set<std::string> all(s.test_docs.begin(), s.test_docs.end());
        for (const auto& d : train) EXPECT_FALSE(all.count(d));
        all.insert(train.begin(), train.end());
        EXPECT_EQ(all, std::set<std::string>(ds.documents().begin(), ds.documents().end()));
        // no sentence on both sides
        auto tr = ds.sentences_in(s.train_docs), te = ds.sentences_in(s.test_docs);
        EXPECT_EQ(tr.size() + te.size(), ds.size());
    }
}

TEST(MakeFolds, EvenDeal) {
    auto plan = make_folds(testutil::make_dataset(50, 1), 5, 9);
    for (const auto& f : plan.folds) EXPECT_EQ(f.size(), 10u);

    auto small = make_folds(testutil::make_dataset(7, 1), 5, 9);
    std::vector<std::size_t> sizes;
    for (const auto& f : small.folds) sizes.push_back(f.size());
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1, 1, 1}));
}

TEST(MakeFolds, PartitionPropertyAcrossSeeds) {
    auto ds = testutil::make_dataset(23, 1);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto plan = make_folds(ds, 5, seed);
        std::multiset<std::string> seen;
        std::size_t lo = 100, hi = 0;
        for (const auto& f : plan.folds) {
            seen.insert(f.begin(), f.end());
            lo = std::min(lo, f.size());
            hi = std::max(hi, f.size());
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_EQ(seen, std::multiset<std::string>(ds.documents().begin(), ds.documents().end()));
        EXPECT_EQ(make_folds(ds, 5, seed).folds, plan.folds);
    }
}

TEST(MakeFolds, Errors) {
    auto ds = testutil::make_dataset(4, 1);
    try {
        make_folds(ds, 5, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TooManyFolds);
    }
    EXPECT_THROW(make_folds(ds, 1, 0), Error);
}

TEST(Synthetic, DeterministicPerSeed) {
    SyntheticSpec spec{3, 6, 5, 8, 0.3, 4.0};
    auto [a, va] = generate_synthetic(spec, 5);
    auto [b, vb] = generate_synthetic(spec, 5);
    EXPECT_EQ(a, b);
    EXPECT_EQ(va, vb);
    auto [c, vc] = generate_synthetic(spec, 6);
    EXPECT_NE(va, vc);
    EXPECT_EQ(a.documents().size(), 6u);
    EXPECT_EQ(a.size(), 30u);
    EXPECT_EQ(va.dim(), 8u);
}

TEST(Synthetic, CentersRespectSeparationWhenClassesExceedDim) {
    // 6 classes in 2 dimensions uses rejection sampling instead of axes
    auto [ds, store] = generate_synthetic({6, 4, 6, 2, 0.0, 3.0}, 2);
    std::vector<std::vector<float>> centers(6);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto v = store.row(i);
        centers[static_cast<std::size_t>(ds.sentences()[i].label)] = {v[0], v[1]};
    }
    for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = a + 1; b < 6; ++b) {
            const double dx = centers[a][0] - centers[b][0], dy = centers[a][1] - centers[b][1];
            EXPECT_GE(std::sqrt(dx * dx + dy * dy), 3.0 - 1e-5);
        }
}
