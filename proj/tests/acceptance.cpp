// Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero if any criterion fails. Tolerances are fixed below.

#include "datasens/datasens.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace datasens;

namespace {

constexpr double kGradientTolerance = 1e-4;
constexpr double kGradientStep = 1e-5;
constexpr double kKinkMargin = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr double kMetricTolerance = 1e-12;
constexpr double kCurveFinalF1 = 0.95;
constexpr double kCurveSpearman = 0.8;
constexpr double kCurveSeconds = 300.0;
constexpr double kNoiseRetention = 0.90;
constexpr double kFoldSpread = 0.05;
constexpr double kTightDiagonal = 95.0;
constexpr double kChanceBand = 10.0;
constexpr double kRowSumTolerance = 1e-6;
constexpr double kRealFindingTarget = 49.0;
constexpr double kRealFindingBand = 10.0;

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
    Outcome outcome;
    std::string detail;
};

Verdict check(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::string num(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// The desk-scale corpus shared by the learning-curve and noise-sweep checks:
// 3 classes, 30 documents of 20 sentences, spread 0.1, separation 5, in the
// 512 dimensions of the sentence encoder's output.
SyntheticSpec desk_corpus() {
    SyntheticSpec s;
    s.embedding_dim = 512;
    return s;
}

constexpr std::uint64_t kCorpusSeed = 1;

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240601);
    double worst = 0.0;
    std::size_t resampled = 0;
    for (int instance = 0; instance < 100;) {
        const std::size_t d = 1 + rng.below(8), h = 1 + rng.below(8), c = 2 + rng.below(3);
        const std::size_t n = 1 + rng.below(16);
        Model m = init_model(d, h, c, rng.next());
        for (Eigen::Index i = 0; i < m.b1.size(); ++i) m.b1(i) = 0.5 * rng.normal();
        for (Eigen::Index i = 0; i < m.b2.size(); ++i) m.b2(i) = 0.5 * rng.normal();
        Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        std::vector<LabelId> y;
        for (std::size_t i = 0; i < n; ++i) y.push_back(static_cast<LabelId>(rng.below(c)));
        // finite differences are meaningless across the relu kink
        const Matrix pre = (x * m.W1).rowwise() + m.b1.transpose();
        if (pre.cwiseAbs().minCoeff() < kKinkMargin) {
            ++resampled;
            continue;
        }
        const auto analytic = gradients(m, x, y);
        const auto numeric = oracle::finite_difference(m, x, y, kGradientStep);
        worst = std::max(worst, oracle::max_relative_error(analytic, numeric));
        ++instance;
    }
    const double secs = seconds_since(t0);
    return check(worst <= kGradientTolerance && secs < kGradientSeconds,
                 "100 models, max relative error " + num(worst, 3) + " (limit " + num(kGradientTolerance) +
                     "), " + std::to_string(resampled) + " resampled near kink, " + num(secs, 3) + "s");
}

Verdict metric_oracle() {
    Rng rng(77);
    double worst = 0.0;
    bool support_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t c = 2 + rng.below(9);
        std::vector<LabelId> gold, pred;
        const std::size_t n = 1 + rng.below(300);
        // skewed draws leave some classes absent from gold or predictions
        const std::size_t active = 1 + rng.below(c);
        for (std::size_t i = 0; i < n; ++i) {
            gold.push_back(static_cast<LabelId>(rng.below(active)));
            pred.push_back(rng.below(3) == 0 ? gold.back() : static_cast<LabelId>(rng.below(c)));
        }
        const auto m = confusion(gold, pred, c);
        std::vector<std::vector<std::uint64_t>> rows(c, std::vector<std::uint64_t>(c, 0));
        for (std::size_t i = 0; i < n; ++i)
            ++rows[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(pred[i])];
        const auto got = per_label_scores(m);
        const auto want = oracle::per_label(rows);
        for (std::size_t l = 0; l < c; ++l) {
            worst = std::max({worst, std::abs(got.per_label[l].precision - want[l].precision),
                              std::abs(got.per_label[l].recall - want[l].recall),
                              std::abs(got.per_label[l].f1 - want[l].f1)});
            support_ok &= got.per_label[l].support == want[l].support &&
                          m(l, l) == rows[l][l];
        }
        worst = std::max({worst, std::abs(got.weighted_f1 - oracle::weighted_f1(want)),
                          std::abs(weighted_avg_f1(got) - oracle::weighted_f1(want))});
        support_ok &= m.total() == n;
    }
    return check(worst <= kMetricTolerance && support_ok,
                 "1000 matrices, max deviation " + num(worst, 3) + (support_ok ? "" : ", support mismatch"));
}

Verdict knn_oracle() {
    Rng rng(4242);
    std::size_t mismatches = 0, queries = 0, tied = 0;
    for (int instance = 0; instance < 200; ++instance) {
        const std::size_t n = 2 + rng.below(499), d = 32;
        const bool lattice = instance % 2 == 0;
        EmbeddingStore store(d);
        std::vector<float> v(d);
        for (std::size_t i = 0; i < n; ++i) {
            if (!lattice && i > 0 && rng.below(5) == 0) {
                // exact duplicate of an earlier row
                auto src = store.row(rng.below(i));
                v.assign(src.begin(), src.end());
            } else {
                for (auto& x : v)
                    x = lattice ? static_cast<float>(static_cast<int>(rng.below(3)) - 1)
                                : static_cast<float>(rng.normal());
            }
            // ids out of insertion order so tie-breaking by id is exercised
            store.add("p" + std::to_string((i * 7919) % 100003), v);
        }
        const std::size_t k = 1 + rng.below(40);
        for (int q = 0; q < 10; ++q) {
            const auto& id = store.id(rng.below(n));
            const auto got = knn(store, id, k).neighbors;
            const auto want = oracle::knn(store, id, k);
            ++queries;
            if (got != want) ++mismatches;
            for (std::size_t i = 1; i < want.size(); ++i)
                if (want[i].distance == want[i - 1].distance) {
                    ++tied;
                    break;
                }
        }
    }
    return check(mismatches == 0 && tied > 0,
                 std::to_string(queries) + " queries on 200 instances, " + std::to_string(tied) +
                     " with distance ties, " + std::to_string(mismatches) + " mismatches");
}

Verdict learning_curve() {
    auto [ds, store] = generate_synthetic(desk_corpus(), kCorpusSeed);
    const auto data = attach(ds, store);
    ExperimentManifest m;
    m.config.seed = kCorpusSeed;
    m.params.repeats = 5;
    const auto t0 = std::chrono::steady_clock::now();
    const auto series = run_learning_curve(data, m);
    const double secs = seconds_since(t0);
    const auto curve = mean_curve(series);
    std::vector<double> keys, f1;
    for (const auto& p : curve) {
        keys.push_back(p.key);
        f1.push_back(p.weighted_f1);
    }
    const double rho = oracle::spearman(keys, f1);
    const double final_f1 = f1.empty() ? 0.0 : f1.back();
    return check(final_f1 >= kCurveFinalF1 && rho > kCurveSpearman && secs < kCurveSeconds,
                 std::to_string(curve.size()) + " points over 5 orders, final weighted F1 " + num(final_f1) +
                     " (>= " + num(kCurveFinalF1) + "), Spearman " + num(rho) + " (> " + num(kCurveSpearman) +
                     "), " + num(secs, 3) + "s");
}

Verdict noise_sweep() {
    auto [ds, store] = generate_synthetic(desk_corpus(), kCorpusSeed);
    const auto data = attach(ds, store);
    ExperimentManifest m;
    m.config.seed = kCorpusSeed;
    m.params.grid = {0.0, 0.25, 0.30};
    m.params.mode = CorruptionMode::Random;
    const auto random = run_noise_sweep(data, m);
    m.params.mode = CorruptionMode::Consistent;
    const auto consistent = run_noise_sweep(data, m);
    const double base = random.records[0].scores.weighted_f1;
    const double r25 = random.records[1].scores.weighted_f1, c25 = consistent.records[1].scores.weighted_f1;
    const double r30 = random.records[2].scores.weighted_f1;
    return check(c25 <= r25 && r30 >= kNoiseRetention * base,
                 "baseline " + num(base) + ", at 0.25 consistent " + num(c25) + " <= random " + num(r25) +
                     ", random at 0.30 " + num(r30) + " (>= " + num(kNoiseRetention * base) + ")");
}

Verdict fold_variance() {
    // homogeneous: every document mixes all classes in the same proportions
    auto [ds, store] = generate_synthetic(SyntheticSpec{}, kCorpusSeed);
    const auto data = attach(ds, store);
    ExperimentManifest m;
    m.config.seed = kCorpusSeed;
    const auto series = run_fold_variance(data, m);
    const double spread = series.spread ? series.spread->weighted_f1 : 1.0;

    // partition invariants over a seed sweep; a one-epoch model keeps it cheap
    std::size_t violations = 0;
    const std::multiset<std::string> all_docs(ds.documents().begin(), ds.documents().end());
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        ExperimentManifest q;
        q.config.seed = seed;
        q.config.max_epochs = 1;
        q.config.patience = 1;
        q.config.hidden = 4;
        const auto s = run_fold_variance(data, q);
        std::multiset<std::string> seen;
        std::size_t evaluated = 0, lo = ds.size(), hi = 0;
        for (const auto& r : s.records) {
            seen.insert(r.test_docs.begin(), r.test_docs.end());
            evaluated += r.scores.total_support();
            lo = std::min(lo, r.test_docs.size());
            hi = std::max(hi, r.test_docs.size());
            if (r.train_sentences + r.test_sentences != ds.size()) ++violations;
        }
        if (s.records.size() != 5 || seen != all_docs || evaluated != ds.size() || hi - lo > 1) ++violations;
    }
    return check(spread < kFoldSpread && violations == 0,
                 "k=5 weighted-F1 spread " + num(spread) + " (< " + num(kFoldSpread) + "), " +
                     std::to_string(violations) + " partition violations over 50 seeds");
}

double worst_row_error(const NeighborhoodProfile& p) {
    double worst = 0.0;
    for (std::size_t b = 0; b < p.classes(); ++b) {
        if (!p.class_sizes[b]) continue;
        double sum = 0.0;
        for (double v : p.percent[b]) sum += v;
        worst = std::max(worst, std::abs(sum - 100.0));
    }
    return worst;
}

Verdict homogeneity() {
    auto [tds, tstore] = generate_synthetic(SyntheticSpec{}, kCorpusSeed);
    const auto tight = profile(attach(tds, tstore), 20);
    double tight_min = 100.0;
    for (std::size_t b = 0; b < tight.classes(); ++b) tight_min = std::min(tight_min, tight.percent[b][b]);

    SyntheticSpec chance_spec;
    chance_spec.num_classes = 4;
    chance_spec.num_docs = 50;
    chance_spec.sentences_per_doc = 20;
    chance_spec.cluster_spread = 100.0;
    chance_spec.center_separation = 0.1;
    auto [cds, cstore] = generate_synthetic(chance_spec, kCorpusSeed);
    const auto chance = profile(attach(cds, cstore), 20);
    const double level = 100.0 / static_cast<double>(chance_spec.num_classes);
    double chance_dev = 0.0;
    for (std::size_t b = 0; b < chance.classes(); ++b)
        chance_dev = std::max(chance_dev, std::abs(chance.percent[b][b] - level));

    const double rows = std::max(worst_row_error(tight), worst_row_error(chance));
    return check(tight_min >= kTightDiagonal && chance_dev <= kChanceBand && rows <= kRowSumTolerance,
                 "tight corpus min diagonal " + num(tight_min) + " (>= " + num(kTightDiagonal) + "), " +
                     std::to_string(cds.size()) + "-sentence chance corpus max |diagonal - " + num(level) +
                     "| " + num(chance_dev) + " (<= " + num(kChanceBand) + "), worst row-sum error " +
                     num(rows, 3));
}

Verdict determinism() {
    const auto root = fs::temp_directory_path() / "datasens-acceptance-determinism";
    fs::remove_all(root);
    RunConfig synth;
    synth.command = Command::Synth;
    synth.out_dir = (root / "corpus").string();
    synth.seed = 9;
    synth.synth.num_docs = 10;
    synth.synth.sentences_per_doc = 6;
    execute(synth);

    std::size_t compared = 0, differing = 0;
    for (auto command : {Command::LearningCurve, Command::FoldVariance, Command::NoiseSweep}) {
        RunConfig cfg;
        cfg.command = command;
        cfg.source.data_path = (root / "corpus" / "data.jsonl").string();
        cfg.source.embeddings_path = (root / "corpus" / "embeddings.jsonl").string();
        cfg.seed = 31;
        cfg.train.max_epochs = 10;
        cfg.train.patience = 4;
        cfg.train.hidden = 32;
        cfg.params.grid = {0.0, 0.3, 0.6};
        cfg.params.mode = CorruptionMode::Consistent;
        const auto name = std::string(to_string(command));
        cfg.out_dir = (root / (name + "-run")).string();
        const auto written = execute(cfg);
        replay((root / (name + "-run") / "manifest.json").string(), (root / (name + "-replay")).string(), 2);
        for (const auto& p : written) {
            ++compared;
            if (slurp(p) != slurp(root / (name + "-replay") / p.filename())) ++differing;
        }
    }
    return check(compared == 9 && differing == 0,
                 "3 experiment kinds, " + std::to_string(compared) + " files compared after replay, " +
                     std::to_string(differing) + " differ");
}

/// Label whose name contains `needle` (schemas may use "EvidenceSentence").
std::optional<LabelId> find_label(const LabelSchema& schema, const std::string& needle) {
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (schema.name(static_cast<LabelId>(i)).find(needle) != std::string::npos) return static_cast<LabelId>(i);
    return std::nullopt;
}

Verdict real_data() {
    const char* data_path = std::getenv("DATASENS_BVA_DATA");
    if (!data_path || !*data_path) return {Outcome::Skip, "set DATASENS_BVA_DATA (and DATASENS_BVA_EMBEDDINGS) to run"};
    const auto ds = load_dataset(data_path);
    const auto counts = ds.label_counts();
    const std::vector<std::pair<std::string, std::size_t>> table = {
        {"Other", 477}, {"Finding", 490}, {"Evidence", 2420}, {"Rule", 938}, {"Citation", 1118}, {"Reasoning", 710}};
    bool counts_ok = ds.size() == 6153 && ds.documents().size() == 50;
    std::string detail = "total " + std::to_string(ds.size()) + ", documents " + std::to_string(ds.documents().size());
    for (const auto& [name, expected] : table) {
        const auto id = find_label(ds.schema(), name);
        const std::size_t got = id ? counts[static_cast<std::size_t>(*id)] : 0;
        counts_ok &= got == expected;
        detail += ", " + name + " " + std::to_string(got);
    }
    const char* emb_path = std::getenv("DATASENS_BVA_EMBEDDINGS");
    if (!emb_path || !*emb_path) return check(counts_ok, detail + "; homogeneity skipped (no embeddings)");
    const auto p = profile(attach(ds, load_embeddings(emb_path)), 20);
    const double citation = homogeneity_score(p, *find_label(ds.schema(), "Citation"));
    const double reasoning = homogeneity_score(p, *find_label(ds.schema(), "Reasoning"));
    const double finding = homogeneity_score(p, *find_label(ds.schema(), "Finding"));
    const bool hom_ok = citation > reasoning && std::abs(finding - kRealFindingTarget) <= kRealFindingBand;
    return check(counts_ok && hom_ok, detail + "; Citation " + num(citation) + " > Reasoning " + num(reasoning) +
                                          ", Finding " + num(finding) + " (49 +/- 10)");
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"gradient oracle", gradient_oracle},
        {"metric oracle", metric_oracle},
        {"knn oracle", knn_oracle},
        {"learning curve (desk scale)", learning_curve},
        {"noise sweep (desk scale)", noise_sweep},
        {"fold variance (desk scale)", fold_variance},
        {"homogeneity", homogeneity},
        {"determinism", determinism},
        {"real data (contingent)", real_data},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {Outcome::Fail, std::string("exception: ") + e.what()};
        }
        const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
        failed += v.outcome == Outcome::Fail;
        std::cout << tag << "  " << name << ": " << v.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
