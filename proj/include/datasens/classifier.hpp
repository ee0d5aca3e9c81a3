#pragma once

// Dense sentence classifier over fixed embeddings:
//   input -> dense(hidden, relu) -> dense(classes, softmax)
// trained with mean categorical cross-entropy and Adam, using a seeded
// validation holdout for early stopping and best-epoch restoration.

#include "datasens/corpus.hpp"
#include "datasens/error.hpp"
#include "datasens/random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace datasens {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Model {
    Matrix W1;  // input_dim x hidden
    Vector b1;  // hidden
    Matrix W2;  // hidden x classes
    Vector b2;  // classes

    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(W1.rows()); }
    std::size_t hidden() const noexcept { return static_cast<std::size_t>(W1.cols()); }
    std::size_t num_classes() const noexcept { return static_cast<std::size_t>(W2.cols()); }
    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size());
    }

    bool all_finite() const {
        return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
    }

    friend bool operator==(const Model& a, const Model& b) {
        return a.W1.rows() == b.W1.rows() && a.W1.cols() == b.W1.cols() &&
               a.W2.cols() == b.W2.cols() && a.W1 == b.W1 && a.b1 == b.b1 && a.W2 == b.W2 &&
               a.b2 == b.b2;
    }
};

/// Same shapes as Model; used for gradients and Adam moments.
using Gradients = Model;

struct TrainConfig {
    std::size_t max_epochs = 100;
    std::size_t patience = 30;
    double validation_fraction = 0.10;
    std::size_t batch_size = 32;
    std::size_t hidden = 256;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
        if (max_epochs == 0) fail("max_epochs must be positive");
        if (patience == 0 || patience > max_epochs) fail("patience must lie in [1, max_epochs]");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
            fail("validation_fraction must lie in (0, 1)");
        if (batch_size == 0) fail("batch_size must be positive");
        if (hidden == 0) fail("hidden must be positive");
        if (!(learning_rate > 0.0) || !(epsilon > 0.0)) fail("learning rate and epsilon must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            fail("adam betas must lie in (0, 1)");
    }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["validation_fraction"] = c.validation_fraction;
    j["batch_size"] = c.batch_size;
    j["hidden"] = c.hidden;
    j["learning_rate"] = c.learning_rate;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["epsilon"] = c.epsilon;
    j["seed"] = c.seed;
    j["init"] = "glorot_uniform";
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.max_epochs = j.at("max_epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
inline Model init_model(std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                        std::uint64_t seed) {
    if (num_classes < 2)
        throw Error(ErrorCode::InvalidSchema, "classifier needs at least 2 classes");
    if (input_dim == 0 || hidden == 0) throw Error(ErrorCode::ShapeError, "dimensions must be positive");
    Rng rng(seed);
    auto fill = [&](Matrix& w) {
        const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
    };
    const auto in = static_cast<Eigen::Index>(input_dim), h = static_cast<Eigen::Index>(hidden),
               k = static_cast<Eigen::Index>(num_classes);
    Model m{Matrix(in, h), Vector::Zero(h), Matrix(h, k), Vector::Zero(k)};
    fill(m.W1);
    fill(m.W2);
    return m;
}

inline Model zeros_like(const Model& m) {
    return {Matrix::Zero(m.W1.rows(), m.W1.cols()), Vector::Zero(m.b1.size()),
            Matrix::Zero(m.W2.rows(), m.W2.cols()), Vector::Zero(m.b2.size())};
}

namespace detail {

struct Activations {
    Matrix hidden_pre;  // batch x hidden
    Matrix hidden;      // relu(hidden_pre)
    Matrix probs;       // batch x classes
};

inline void check_input(const Model& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_dim())
        throw Error(ErrorCode::ShapeError, "input has " + std::to_string(x.cols()) +
                                               " columns, model expects " +
                                               std::to_string(model.input_dim()));
}

inline void softmax_rows(Matrix& z) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double peak = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - peak).exp();
        z.row(r) /= z.row(r).sum();
    }
}

inline Activations run_forward(const Model& model, const Matrix& x) {
    check_input(model, x);
    Activations a;
    a.hidden_pre = (x * model.W1).rowwise() + model.b1.transpose();
    a.hidden = a.hidden_pre.cwiseMax(0.0);
    a.probs = (a.hidden * model.W2).rowwise() + model.b2.transpose();
    softmax_rows(a.probs);
    return a;
}

inline void check_labels(std::span<const LabelId> gold, Eigen::Index rows, std::size_t classes) {
    if (static_cast<Eigen::Index>(gold.size()) != rows)
        throw Error(ErrorCode::ShapeError, std::to_string(gold.size()) + " labels for " +
                                               std::to_string(rows) + " examples");
    if (gold.empty()) throw Error(ErrorCode::ShapeError, "empty batch");
    for (LabelId g : gold)
        if (g < 0 || static_cast<std::size_t>(g) >= classes)
            throw Error(ErrorCode::LabelRangeError, "label id " + std::to_string(g) +
                                                        " outside [0, " + std::to_string(classes) + ")");
}

} // namespace detail

/// Class probabilities, one row per input row.
inline Matrix forward(const Model& model, const Matrix& x) {
    return detail::run_forward(model, x).probs;
}

constexpr double kProbabilityFloor = 1e-12;

/// Mean of -ln p[gold], probabilities clamped to [1e-12, 1].
inline double loss(const Matrix& probs, std::span<const LabelId> gold) {
    detail::check_labels(gold, probs.rows(), static_cast<std::size_t>(probs.cols()));
    double total = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const double p = std::clamp(probs(static_cast<Eigen::Index>(i), gold[i]), kProbabilityFloor, 1.0);
        total -= std::log(p);
    }
    return total / static_cast<double>(gold.size());
}

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Analytic gradients of the mean cross-entropy. The clamp in `loss` only
/// matters below p = 1e-12 and is not differentiated through.
inline LossAndGradients loss_and_gradients(const Model& model, const Matrix& x,
                                           std::span<const LabelId> gold) {
    auto a = detail::run_forward(model, x);
    detail::check_labels(gold, x.rows(), model.num_classes());
    const double batch = static_cast<double>(gold.size());

    LossAndGradients out;
    out.loss = loss(a.probs, gold);
    Matrix d_logits = std::move(a.probs);
    for (std::size_t i = 0; i < gold.size(); ++i) d_logits(static_cast<Eigen::Index>(i), gold[i]) -= 1.0;
    d_logits /= batch;

    out.grads.W2 = a.hidden.transpose() * d_logits;
    out.grads.b2 = d_logits.colwise().sum().transpose();
    Matrix d_hidden = d_logits * model.W2.transpose();
    d_hidden = d_hidden.cwiseProduct((a.hidden_pre.array() > 0.0).cast<double>().matrix());
    out.grads.W1 = x.transpose() * d_hidden;
    out.grads.b1 = d_hidden.colwise().sum().transpose();
    return out;
}

inline Gradients gradients(const Model& model, const Matrix& x, std::span<const LabelId> gold) {
    return loss_and_gradients(model, x, gold).grads;
}

struct AdamState {
    Model m;  // first moment
    Model v;  // second moment
    std::uint64_t step = 0;

    static AdamState fresh(const Model& like) { return {zeros_like(like), zeros_like(like), 0}; }
};

/// One bias-corrected Adam update at step t (1-based), elementwise.
inline void adam_step(Model& model, const Gradients& g, AdamState& state, const TrainConfig& config,
                      std::uint64_t t) {
    if (t == 0) throw Error(ErrorCode::InvalidArgument, "adam step index starts at 1");
    const double b1 = config.beta1, b2 = config.beta2;
    const double correct1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double correct2 = 1.0 - std::pow(b2, static_cast<double>(t));
    const double lr = config.learning_rate, eps = config.epsilon;
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / correct1) / ((v.array() / correct2).sqrt() + eps);
    };
    update(model.W1, g.W1, state.m.W1, state.v.W1);
    update(model.b1, g.b1, state.m.b1, state.v.b1);
    update(model.W2, g.W2, state.m.W2, state.v.W2);
    update(model.b2, g.b2, state.m.b2, state.v.b2);
    state.step = t;
}

/// Argmax per row; ties go to the lowest label id.
inline std::vector<LabelId> predict(const Model& model, const Matrix& x) {
    if (x.rows() == 0) {
        detail::check_input(model, x);
        return {};
    }
    const Matrix probs = forward(model, x);
    std::vector<LabelId> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < probs.cols(); ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        out[static_cast<std::size_t>(r)] = static_cast<LabelId>(best);
    }
    return out;
}

inline double accuracy(const Model& model, const Matrix& x, std::span<const LabelId> gold) {
    const auto pred = predict(model, x);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == gold[i];
    return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
    double best_val_accuracy = 0.0;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
};

struct TrainResult {
    Model model;  // parameters after the best validation epoch
    TrainHistory history;
};

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

} // namespace detail

/// Size of the seeded validation holdout for n examples.
inline std::size_t validation_count(std::size_t n, double fraction) {
    const auto rounded = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::max<std::size_t>(1, rounded);
}

/// Trains a fresh model. A seeded uniform sample of round(fraction * n)
/// examples (at least one) is held out; training stops once validation
/// accuracy has not improved for `patience` epochs or at `max_epochs`.
inline TrainResult train(const Matrix& x, std::span<const LabelId> y, std::size_t num_classes,
                         const TrainConfig& config) {
    config.validate();
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorCode::ShapeError, "feature rows and labels differ in length");
    for (LabelId g : y)
        if (g < 0 || static_cast<std::size_t>(g) >= num_classes)
            throw Error(ErrorCode::LabelRangeError, "label id " + std::to_string(g));
    const std::size_t n = y.size();
    const std::size_t n_val = validation_count(n, config.validation_fraction);
    if (n < n_val + 2)
        throw Error(ErrorCode::DegenerateValidation,
                    std::to_string(n) + " examples leave fewer than 2 for training after holdout");

    Rng holdout_rng(derive_seed(config.seed, "classifier/holdout"));
    auto perm = holdout_rng.permutation(n);
    std::vector<std::size_t> val_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val_rows.begin(), val_rows.end());
    std::sort(train_rows.begin(), train_rows.end());

    const Matrix x_val = detail::gather_rows(x, val_rows);
    std::vector<LabelId> y_val;
    for (auto r : val_rows) y_val.push_back(y[r]);

    Model model = init_model(static_cast<std::size_t>(x.cols()), config.hidden, num_classes,
                             derive_seed(config.seed, "classifier/init"));
    AdamState adam = AdamState::fresh(model);
    Rng shuffle_rng(derive_seed(config.seed, "classifier/shuffle"));

    TrainResult result{model, {}};
    auto& hist = result.history;
    hist.train_size = train_rows.size();
    hist.validation_size = n_val;
    double best = -1.0;

    std::vector<std::size_t> order = train_rows;
    std::vector<LabelId> y_batch;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::span<const std::size_t> rows(order.data() + start, stop - start);
            const Matrix xb = detail::gather_rows(x, rows);
            y_batch.clear();
            for (auto r : rows) y_batch.push_back(y[r]);
            auto lg = loss_and_gradients(model, xb, y_batch);
            loss_sum += lg.loss * static_cast<double>(rows.size());
            adam_step(model, lg.grads, adam, config, adam.step + 1);
        }
        const double val_acc = accuracy(model, x_val, y_val);
        hist.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_acc});
        hist.stopped_epoch = epoch;
        if (val_acc > best) {
            best = val_acc;
            hist.best_epoch = epoch;
            hist.best_val_accuracy = val_acc;
            result.model = model;
        } else if (epoch - hist.best_epoch >= config.patience) {
            break;
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: a JSON document with shapes, label names, config and all
// parameters. Doubles are written in shortest round-trip form, so
// load -> save reproduces the file byte for byte.

struct Checkpoint {
    Model model;
    std::vector<std::string> labels;
    TrainConfig config;
};

namespace detail {

inline nlohmann::json flatten(const Matrix& m) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
    return arr;
}

inline nlohmann::json flatten(const Vector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

inline void unflatten(const nlohmann::json& arr, Matrix& m) {
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(m.size()))
        throw Error(ErrorCode::MalformedRecord, "checkpoint parameter block has wrong size");
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = arr[i++].get<double>();
}

inline void unflatten(const nlohmann::json& arr, Vector& v) {
    if (!arr.is_array() || arr.size() != static_cast<std::size_t>(v.size()))
        throw Error(ErrorCode::MalformedRecord, "checkpoint parameter block has wrong size");
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = arr[static_cast<std::size_t>(i)].get<double>();
}

} // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
    nlohmann::ordered_json j;
    j["format"] = "datasens-model";
    j["version"] = 1;
    j["input_dim"] = ck.model.input_dim();
    j["hidden"] = ck.model.hidden();
    j["num_classes"] = ck.model.num_classes();
    j["labels"] = ck.labels;
    j["config"] = to_json(ck.config);
    j["seed"] = ck.config.seed;
    j["W1"] = detail::flatten(ck.model.W1);
    j["b1"] = detail::flatten(ck.model.b1);
    j["W2"] = detail::flatten(ck.model.W2);
    j["b2"] = detail::flatten(ck.model.b2);
    return j.dump() + "\n";
}

inline Checkpoint parse_checkpoint(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("checkpoint: ") + e.what());
    }
    try {
        if (j.at("format") != "datasens-model" || j.at("version") != 1)
            throw Error(ErrorCode::MalformedRecord, "not a version-1 datasens checkpoint");
        const auto in = j.at("input_dim").get<Eigen::Index>();
        const auto h = j.at("hidden").get<Eigen::Index>();
        const auto k = j.at("num_classes").get<Eigen::Index>();
        Checkpoint ck{{Matrix(in, h), Vector(h), Matrix(h, k), Vector(k)},
                      j.at("labels").get<std::vector<std::string>>(),
                      train_config_from_json(j.at("config"))};
        if (ck.labels.size() != static_cast<std::size_t>(k))
            throw Error(ErrorCode::MalformedRecord, "label count does not match output layer");
        detail::unflatten(j.at("W1"), ck.model.W1);
        detail::unflatten(j.at("b1"), ck.model.b1);
        detail::unflatten(j.at("W2"), ck.model.W2);
        detail::unflatten(j.at("b2"), ck.model.b2);
        if (!ck.model.all_finite()) throw Error(ErrorCode::InvalidValue, "non-finite parameter");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write checkpoint '" + path + "'");
    out << serialize_checkpoint(ck);
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open checkpoint '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(text);
}

} // namespace datasens
