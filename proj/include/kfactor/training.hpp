#pragma once

// Supervised training with validation-based early stopping, and greedy
// autoencoder pretraining followed by two fine-tuning stages.

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "kfactor/dataset.hpp"
#include "kfactor/error.hpp"
#include "kfactor/mlp.hpp"
#include "kfactor/random.hpp"
#include "kfactor/scg.hpp"

namespace kfactor {

enum class InitMode { random, autoencoder };

inline std::string_view to_string(InitMode m) { return m == InitMode::random ? "random" : "autoencoder"; }

inline InitMode parse_init_mode(std::string_view name) {
    if (name == "random") return InitMode::random;
    if (name == "autoencoder") return InitMode::autoencoder;
    throw ValidationError("unknown init mode '" + std::string(name) + "' (expected random or autoencoder)");
}

struct TrainConfig {
    int max_epochs = 1000;
    double min_gradient_norm = 1e-6;
    int max_validation_failures = 6;
    double validation_fraction = 0.15;
    InitMode init_mode = InitMode::random;
    std::uint64_t seed = 1;
    int hidden_units = 100;
    Activation activation = Activation::tanh;
    double objective_floor = 1e-12;

    void validate() const {
        detail::require(max_epochs >= 0, "max_epochs must be non-negative");
        detail::require(min_gradient_norm >= 0.0, "min_gradient_norm must be non-negative");
        detail::require(max_validation_failures >= 1, "max_validation_failures must be at least 1");
        detail::require(validation_fraction >= 0.0 && validation_fraction < 1.0,
                        "validation_fraction must lie in [0, 1)");
        detail::require(hidden_units >= 1, "hidden_units must be at least 1");
    }

    [[nodiscard]] ScgOptions scg_options() const {
        ScgOptions o;
        o.max_epochs = max_epochs;
        o.min_gradient_norm = min_gradient_norm;
        o.objective_floor = objective_floor;
        return o;
    }
};

struct TrainingResult {
    MlpParameters params;
    TrainingHistory history;
    /// Pretraining runs only: autoencoder and output-layer stage histories.
    std::vector<TrainingHistory> stage_histories;
};

/// Shared substream tags, one per consumer of TrainConfig::seed.
namespace seed_tags {
inline constexpr std::uint64_t validation_split = 0x76616C;
inline constexpr std::uint64_t classifier_init = 0x636C73;
inline constexpr std::uint64_t autoencoder_init = 0x616531;
}  // namespace seed_tags

namespace detail {

struct MatrixPair {
    Matrix inputs;
    Matrix targets;
};

struct TrainingData {
    MatrixPair fit;
    MatrixPair validation;  // empty when validation_fraction == 0

    [[nodiscard]] bool has_validation() const { return validation.inputs.cols() > 0; }
};

inline TrainingData prepare(const Dataset& train, const TrainConfig& config) {
    detail::require(!train.empty(), "training set is empty");
    TrainingData data;
    if (config.validation_fraction > 0.0) {
        auto rng = RandomStream(config.seed).substream({seed_tags::validation_split});
        auto [fit, val] = split(train, 1.0 - config.validation_fraction, rng);
        detail::require(!fit.empty(), "training set is empty after carving out validation data");
        data.fit = {input_matrix(fit), target_matrix(fit)};
        if (!val.empty()) data.validation = {input_matrix(val), target_matrix(val)};
    } else {
        data.fit = {input_matrix(train), target_matrix(train)};
    }
    return data;
}

/// Tracks the best validation loss and stops after `limit` consecutive
/// evaluations that fail to improve on it.
class EarlyStopping {
public:
    explicit EarlyStopping(int limit) : limit_(limit) {}

    bool update(double val_loss, const Vector& x) {
        if (val_loss < best_loss_) {
            best_loss_ = val_loss;
            best_x_ = x;
            failures_ = 0;
            return false;
        }
        return ++failures_ >= limit_;
    }

    [[nodiscard]] bool has_best() const { return best_x_.size() > 0; }
    [[nodiscard]] const Vector& best() const { return best_x_; }
    [[nodiscard]] double best_loss() const { return best_loss_; }

private:
    int limit_;
    int failures_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
    Vector best_x_;
};

/// SCG with optional early stopping on a validation objective. Returns the
/// best-validation point when validation data is present.
template <typename Evaluate>
ScgResult minimize_with_validation(const Objective& objective, Vector x0, const ScgOptions& options,
                                   bool use_validation, Evaluate&& validation_loss, int max_failures) {
    if (!use_validation) return scg_minimize(objective, std::move(x0), options);
    EarlyStopping stopper(max_failures);
    Monitor monitor = [&](const Vector& x) {
        MonitorVerdict verdict;
        verdict.val_loss = validation_loss(x);
        verdict.stop = stopper.update(verdict.val_loss, x);
        return verdict;
    };
    ScgResult result = scg_minimize(objective, std::move(x0), options, monitor);
    if (stopper.has_best()) result.x = stopper.best();
    return result;
}

inline MlpParameters with_flat(const MlpParameters& shape, const Vector& flat) {
    MlpParameters p = shape;
    p.assign(flat);
    return p;
}

/// Full-network fine-tuning from `initial` on prepared data.
inline TrainingResult fine_tune(const MlpParameters& initial, const TrainingData& data, const TrainConfig& config) {
    Objective objective = [&](const Vector& flat) {
        auto lg = loss_and_gradient(with_flat(initial, flat), data.fit.inputs, data.fit.targets);
        return ObjectiveValue{lg.loss, std::move(lg.gradient)};
    };
    auto validation_loss = [&](const Vector& flat) {
        return mean_cross_entropy(with_flat(initial, flat), data.validation.inputs, data.validation.targets);
    };
    ScgResult result = minimize_with_validation(objective, initial.flatten(), config.scg_options(),
                                                data.has_validation(), validation_loss,
                                                config.max_validation_failures);
    return {with_flat(initial, result.x), std::move(result.history), {}};
}

inline Matrix hidden_features(const Matrix& w1, const Vector& b1, Activation activation, const Matrix& inputs) {
    Matrix hidden = (w1 * inputs).colwise() + b1;
    activate(activation, hidden);
    return hidden;
}

}  // namespace detail

inline MlpParameters initial_classifier(int input_dim, const TrainConfig& config) {
    auto rng = RandomStream(config.seed).substream({seed_tags::classifier_init});
    return init_random({input_dim, config.hidden_units, kNumClasses}, config.activation, rng);
}

inline TrainingResult train_supervised(const Dataset& train, const TrainConfig& config) {
    config.validate();
    const auto data = detail::prepare(train, config);
    return detail::fine_tune(initial_classifier(train.n, config), data, config);
}

struct Encoder {
    Matrix w1;
    Vector b1;
};

struct PretrainResult {
    Encoder encoder;
    TrainingHistory history;
    double initial_mse = 0.0;
    double final_mse = 0.0;
};

/// Trains a shallow autoencoder on `inputs` (one sample per column) and
/// keeps only its encoder. When `validation_inputs` is non-empty the
/// reconstruction error on it drives early stopping.
inline PretrainResult pretrain_autoencoder(const Matrix& inputs, int hidden, const TrainConfig& config,
                                           const Matrix& validation_inputs = Matrix()) {
    detail::require(inputs.cols() > 0 && inputs.rows() > 0, "pretraining inputs are empty");
    detail::require(hidden >= 1, "autoencoder hidden size must be at least 1");
    auto rng = RandomStream(config.seed).substream({seed_tags::autoencoder_init});
    const AutoencoderParams initial =
        init_autoencoder(static_cast<int>(inputs.rows()), hidden, config.activation, rng);

    auto with = [&](const Vector& flat) {
        AutoencoderParams p = initial;
        p.assign(flat);
        return p;
    };
    Objective objective = [&](const Vector& flat) {
        auto lg = ae_loss_gradient(with(flat), inputs);
        return ObjectiveValue{lg.loss, std::move(lg.gradient)};
    };
    auto validation_loss = [&](const Vector& flat) {
        const Matrix recon = ae_forward(with(flat), validation_inputs);
        return (recon - validation_inputs).squaredNorm() / static_cast<double>(validation_inputs.size());
    };

    const double initial_mse = ae_loss_gradient(initial, inputs).loss;
    ScgResult result = detail::minimize_with_validation(objective, initial.flatten(), config.scg_options(),
                                                        validation_inputs.cols() > 0, validation_loss,
                                                        config.max_validation_failures);
    const AutoencoderParams trained = with(result.x);
    return {{trained.w1, trained.b1}, std::move(result.history), initial_mse, ae_loss_gradient(trained, inputs).loss};
}

/// Which pretraining stages run; both on by default. With both off the
/// pipeline reduces to train_supervised.
struct PretrainStages {
    bool autoencoder = true;
    bool output_layer = true;
};

/// (1) autoencoder pretraining of the hidden layer, (2) training of the
/// softmax layer on frozen hidden features, (3) full fine-tuning with early
/// stopping.
inline TrainingResult train_with_pretraining(const Dataset& train, const TrainConfig& config,
                                             PretrainStages stages = {}) {
    config.validate();
    const auto data = detail::prepare(train, config);
    MlpParameters params = initial_classifier(train.n, config);
    std::vector<TrainingHistory> stage_histories;

    if (stages.autoencoder) {
        auto pre = pretrain_autoencoder(data.fit.inputs, config.hidden_units, config, data.validation.inputs);
        params.w1 = std::move(pre.encoder.w1);
        params.b1 = std::move(pre.encoder.b1);
        stage_histories.push_back(std::move(pre.history));
    }

    if (stages.output_layer) {
        const Matrix fit_hidden = detail::hidden_features(params.w1, params.b1, params.hidden_activation,
                                                          data.fit.inputs);
        const Matrix val_hidden = data.has_validation()
                                      ? detail::hidden_features(params.w1, params.b1, params.hidden_activation,
                                                                data.validation.inputs)
                                      : Matrix();
        const Eigen::Index w2_size = params.w2.size();
        auto output_params = [&](const Vector& flat) {
            std::pair<Matrix, Vector> out{params.w2, params.b2};
            Eigen::Index pos = 0;
            detail::read_row_major(flat, pos, out.first);
            detail::read_row_major(flat, pos, out.second);
            return out;
        };
        // Softmax layer on fixed features: CE gradient is delta * features^T.
        auto layer_loss = [&](const Vector& flat, const Matrix& features, const Matrix& targets, Vector* grad) {
            const auto [w2, b2] = output_params(flat);
            Matrix probs = (w2 * features).colwise() + b2;
            detail::softmax_columns(probs);
            double loss = 0.0;
            for (Eigen::Index c = 0; c < targets.cols(); ++c) loss += cross_entropy(probs.col(c), targets.col(c));
            const double inv_batch = 1.0 / static_cast<double>(targets.cols());
            if (grad) {
                const Matrix delta =
                    ((probs.array().rowwise() * targets.colwise().sum().array()).matrix() - targets) * inv_batch;
                grad->resize(w2_size + b2.size());
                Eigen::Index pos = 0;
                detail::append_row_major(Matrix(delta * features.transpose()), *grad, pos);
                detail::append_row_major(Vector(delta.rowwise().sum()), *grad, pos);
            }
            return loss * inv_batch;
        };
        Objective objective = [&](const Vector& flat) {
            ObjectiveValue v;
            v.value = layer_loss(flat, fit_hidden, data.fit.targets, &v.gradient);
            return v;
        };
        auto validation_loss = [&](const Vector& flat) {
            return layer_loss(flat, val_hidden, data.validation.targets, nullptr);
        };
        Vector x0(w2_size + params.b2.size());
        Eigen::Index pos = 0;
        detail::append_row_major(params.w2, x0, pos);
        detail::append_row_major(params.b2, x0, pos);
        ScgResult stage = detail::minimize_with_validation(objective, x0, config.scg_options(),
                                                           data.has_validation(), validation_loss,
                                                           config.max_validation_failures);
        std::tie(params.w2, params.b2) = output_params(stage.x);
        stage_histories.push_back(std::move(stage.history));
    }

    TrainingResult result = detail::fine_tune(params, data, config);
    result.stage_histories = std::move(stage_histories);
    return result;
}

inline TrainingResult train(const Dataset& train_set, const TrainConfig& config) {
    return config.init_mode == InitMode::random ? train_supervised(train_set, config)
                                                : train_with_pretraining(train_set, config);
}

}  // namespace kfactor
