#pragma once

// Single-hidden-layer perceptron with softmax output, and the companion
// shallow autoencoder used for pretraining.
//
// Parameters are exchanged with optimizers as one flat vector. The canonical
// order is: w1 row-major, b1, w2 row-major, b2 (for the autoencoder: w1
// row-major, b1, w_dec row-major, b_dec). Model files store values in the
// same order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include "kfactor/dataset.hpp"
#include "kfactor/error.hpp"
#include "kfactor/random.hpp"

namespace kfactor {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { tanh, logistic, relu };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::tanh: return "tanh";
        case Activation::logistic: return "logistic";
        case Activation::relu: return "relu";
    }
    return "tanh";
}

inline Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "logistic") return Activation::logistic;
    if (name == "relu") return Activation::relu;
    throw ValidationError("unknown activation '" + std::string(name) + "' (expected tanh, logistic or relu)");
}

namespace detail {

inline void activate(Activation a, Matrix& z) {
    switch (a) {
        case Activation::tanh: z = z.array().tanh(); break;
        case Activation::logistic: z = (1.0 + (-z.array()).exp()).inverse(); break;
        case Activation::relu: z = z.array().max(0.0); break;
    }
}

// Derivative expressed through the pre-activation z and activation g(z).
inline Matrix activation_derivative(Activation a, const Matrix& z, const Matrix& g) {
    switch (a) {
        case Activation::tanh: return (1.0 - g.array().square()).matrix();
        case Activation::logistic: return (g.array() * (1.0 - g.array())).matrix();
        case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    }
    return Matrix::Zero(z.rows(), z.cols());
}

// Column-wise softmax with max shift.
inline void softmax_columns(Matrix& logits) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        auto col = logits.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
    }
}

template <typename Mat>
void append_row_major(const Mat& m, Vector& flat, Eigen::Index& pos) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat[pos++] = m(r, c);
}

template <typename Mat>
void read_row_major(const Vector& flat, Eigen::Index& pos, Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[pos++];
}

inline void require_finite(const Matrix& m, const char* what) {
    require(m.allFinite(), std::string(what) + " contains non-finite values");
}

}  // namespace detail

struct MlpDims {
    int input = 0;
    int hidden = 100;
    int output = kNumClasses;
};

struct MlpParameters {
    Matrix w1;  // hidden x input
    Vector b1;  // hidden
    Matrix w2;  // output x hidden
    Vector b2;  // output
    Activation hidden_activation = Activation::tanh;

    MlpParameters() = default;
    MlpParameters(MlpDims dims, Activation activation)
        : w1(Matrix::Zero(dims.hidden, dims.input)),
          b1(Vector::Zero(dims.hidden)),
          w2(Matrix::Zero(dims.output, dims.hidden)),
          b2(Vector::Zero(dims.output)),
          hidden_activation(activation) {
        detail::require(dims.input > 0 && dims.hidden > 0 && dims.output > 0, "network dimensions must be positive");
    }

    [[nodiscard]] MlpDims dims() const {
        return {static_cast<int>(w1.cols()), static_cast<int>(w1.rows()), static_cast<int>(w2.rows())};
    }
    [[nodiscard]] Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    [[nodiscard]] Vector flatten() const {
        Vector flat(parameter_count());
        Eigen::Index pos = 0;
        detail::append_row_major(w1, flat, pos);
        detail::append_row_major(b1, flat, pos);
        detail::append_row_major(w2, flat, pos);
        detail::append_row_major(b2, flat, pos);
        return flat;
    }

    void assign(const Vector& flat) {
        detail::require(flat.size() == parameter_count(), "flat parameter vector has the wrong length");
        Eigen::Index pos = 0;
        detail::read_row_major(flat, pos, w1);
        detail::read_row_major(flat, pos, b1);
        detail::read_row_major(flat, pos, w2);
        detail::read_row_major(flat, pos, b2);
    }

    void validate() const {
        detail::require(b1.size() == w1.rows() && w2.cols() == w1.rows() && b2.size() == w2.rows(),
                        "inconsistent network parameter shapes");
        detail::require(w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(),
                        "network parameters must be finite");
    }

    friend bool operator==(const MlpParameters& a, const MlpParameters& b) {
        return a.hidden_activation == b.hidden_activation && a.dims().input == b.dims().input &&
               a.dims().hidden == b.dims().hidden && a.dims().output == b.dims().output && a.w1 == b.w1 &&
               a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
    }
};

struct ForwardResult {
    Vector hidden;
    Vector probabilities;
};

inline ForwardResult forward(const MlpParameters& params, const Vector& x) {
    detail::require(x.size() == params.w1.cols(), "forward: input length does not match the network");
    detail::require(x.allFinite(), "forward: input contains non-finite values");
    Matrix hidden = params.w1 * x + params.b1;
    detail::activate(params.hidden_activation, hidden);
    Matrix logits = params.w2 * hidden + params.b2;
    detail::softmax_columns(logits);
    return {hidden.col(0), logits.col(0)};
}

/// Class probabilities for every column of `inputs`.
inline Matrix forward_batch(const MlpParameters& params, const Matrix& inputs) {
    detail::require(inputs.rows() == params.w1.cols(), "forward: input length does not match the network");
    Matrix hidden = (params.w1 * inputs).colwise() + params.b1;
    detail::activate(params.hidden_activation, hidden);
    Matrix logits = (params.w2 * hidden).colwise() + params.b2;
    detail::softmax_columns(logits);
    return logits;
}

inline constexpr double kProbabilityFloor = 1e-300;

inline double cross_entropy(const Vector& probabilities, const Vector& target) {
    detail::require(probabilities.size() == target.size(), "cross_entropy: dimension mismatch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        if (target[i] != 0.0) loss -= target[i] * std::log(std::max(probabilities[i], kProbabilityFloor));
    }
    return loss;
}

struct LossGradient {
    double loss = 0.0;
    Vector gradient;
};

/// Mean cross-entropy over the batch and its exact gradient (canonical order).
/// Inputs and targets hold one sample per column.
inline LossGradient loss_and_gradient(const MlpParameters& params, const Matrix& inputs, const Matrix& targets) {
    detail::require(inputs.rows() == params.w1.cols(), "gradient: input rows do not match the network");
    detail::require(targets.rows() == params.w2.rows(), "gradient: target rows do not match the output layer");
    detail::require(inputs.cols() == targets.cols() && inputs.cols() > 0, "gradient: batch sizes differ or are empty");
    const double inv_batch = 1.0 / static_cast<double>(inputs.cols());

    const Matrix pre_hidden = (params.w1 * inputs).colwise() + params.b1;
    Matrix hidden = pre_hidden;
    detail::activate(params.hidden_activation, hidden);
    Matrix probs = (params.w2 * hidden).colwise() + params.b2;
    detail::softmax_columns(probs);

    double loss = 0.0;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
        for (Eigen::Index r = 0; r < targets.rows(); ++r) {
            if (targets(r, c) != 0.0) loss -= targets(r, c) * std::log(std::max(probs(r, c), kProbabilityFloor));
        }
    }

    // d(CE)/d(logit_i) = p_i * sum_j t_j - t_i
    const Matrix delta_out =
        ((probs.array().rowwise() * targets.colwise().sum().array()).matrix() - targets) * inv_batch;
    const Matrix delta_hidden = (params.w2.transpose() * delta_out).cwiseProduct(
        detail::activation_derivative(params.hidden_activation, pre_hidden, hidden));

    MlpParameters grad;
    grad.w1 = delta_hidden * inputs.transpose();
    grad.b1 = delta_hidden.rowwise().sum();
    grad.w2 = delta_out * hidden.transpose();
    grad.b2 = delta_out.rowwise().sum();
    return {loss * inv_batch, grad.flatten()};
}

inline Vector gradient(const MlpParameters& params, const Matrix& inputs, const Matrix& targets) {
    return loss_and_gradient(params, inputs, targets).gradient;
}

inline double mean_cross_entropy(const MlpParameters& params, const Matrix& inputs, const Matrix& targets) {
    detail::require(inputs.cols() == targets.cols() && inputs.cols() > 0, "loss: batch sizes differ or are empty");
    const Matrix probs = forward_batch(params, inputs);
    double loss = 0.0;
    for (Eigen::Index c = 0; c < targets.cols(); ++c) loss += cross_entropy(probs.col(c), targets.col(c));
    return loss / static_cast<double>(inputs.cols());
}

namespace detail {

inline double glorot_range(Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename Mat>
void fill_uniform_row_major(Mat& m, double range, RandomStream& rng) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-range, range);
}

}  // namespace detail

/// Glorot-uniform weights, zero biases.
inline MlpParameters init_random(MlpDims dims, Activation activation, RandomStream& rng) {
    MlpParameters params(dims, activation);
    detail::fill_uniform_row_major(params.w1, detail::glorot_range(dims.input, dims.hidden), rng);
    detail::fill_uniform_row_major(params.w2, detail::glorot_range(dims.hidden, dims.output), rng);
    return params;
}

// ---------------------------------------------------------------------------
// Autoencoder

struct AutoencoderParams {
    Matrix w1;     // hidden x input
    Vector b1;     // hidden
    Matrix w_dec;  // input x hidden
    Vector b_dec;  // input
    Activation hidden_activation = Activation::tanh;

    AutoencoderParams() = default;
    AutoencoderParams(int input, int hidden, Activation activation)
        : w1(Matrix::Zero(hidden, input)),
          b1(Vector::Zero(hidden)),
          w_dec(Matrix::Zero(input, hidden)),
          b_dec(Vector::Zero(input)),
          hidden_activation(activation) {
        detail::require(input > 0 && hidden > 0, "autoencoder dimensions must be positive");
    }

    [[nodiscard]] Eigen::Index parameter_count() const { return w1.size() + b1.size() + w_dec.size() + b_dec.size(); }

    [[nodiscard]] Vector flatten() const {
        Vector flat(parameter_count());
        Eigen::Index pos = 0;
        detail::append_row_major(w1, flat, pos);
        detail::append_row_major(b1, flat, pos);
        detail::append_row_major(w_dec, flat, pos);
        detail::append_row_major(b_dec, flat, pos);
        return flat;
    }

    void assign(const Vector& flat) {
        detail::require(flat.size() == parameter_count(), "flat autoencoder vector has the wrong length");
        Eigen::Index pos = 0;
        detail::read_row_major(flat, pos, w1);
        detail::read_row_major(flat, pos, b1);
        detail::read_row_major(flat, pos, w_dec);
        detail::read_row_major(flat, pos, b_dec);
    }
};

inline AutoencoderParams init_autoencoder(int input, int hidden, Activation activation, RandomStream& rng) {
    AutoencoderParams params(input, hidden, activation);
    const double range = detail::glorot_range(input, hidden);
    detail::fill_uniform_row_major(params.w1, range, rng);
    detail::fill_uniform_row_major(params.w_dec, range, rng);
    return params;
}

/// Linear-output reconstruction of every column of `inputs`.
inline Matrix ae_forward(const AutoencoderParams& params, const Matrix& inputs) {
    detail::require(inputs.rows() == params.w1.cols(), "ae_forward: input rows do not match the encoder");
    Matrix hidden = (params.w1 * inputs).colwise() + params.b1;
    detail::activate(params.hidden_activation, hidden);
    return (params.w_dec * hidden).colwise() + params.b_dec;
}

/// MSE averaged over batch and components, with its exact gradient.
inline LossGradient ae_loss_gradient(const AutoencoderParams& params, const Matrix& inputs) {
    detail::require(inputs.rows() == params.w1.cols(), "ae_loss_gradient: input rows do not match the encoder");
    detail::require(inputs.cols() > 0, "ae_loss_gradient: empty batch");
    const double scale = 1.0 / static_cast<double>(inputs.size());

    const Matrix pre_hidden = (params.w1 * inputs).colwise() + params.b1;
    Matrix hidden = pre_hidden;
    detail::activate(params.hidden_activation, hidden);
    const Matrix residual = ((params.w_dec * hidden).colwise() + params.b_dec) - inputs;

    const Matrix delta_out = 2.0 * scale * residual;
    const Matrix delta_hidden = (params.w_dec.transpose() * delta_out).cwiseProduct(
        detail::activation_derivative(params.hidden_activation, pre_hidden, hidden));

    AutoencoderParams grad;
    grad.w1 = delta_hidden * inputs.transpose();
    grad.b1 = delta_hidden.rowwise().sum();
    grad.w_dec = delta_out * hidden.transpose();
    grad.b_dec = delta_out.rowwise().sum();
    return {residual.squaredNorm() * scale, grad.flatten()};
}

// ---------------------------------------------------------------------------
// Data conversion

/// Normalized CQI inputs, one sample per column.
inline Matrix input_matrix(const Dataset& dataset) {
    Matrix x(dataset.n, static_cast<Eigen::Index>(dataset.size()));
    for (std::size_t c = 0; c < dataset.size(); ++c) {
        const auto& cqi = dataset.samples[c].cqi;
        detail::require(static_cast<int>(cqi.size()) == dataset.n, "sample length does not match dataset n");
        const auto normalized = normalize_inputs(cqi);
        x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(normalized.data(), dataset.n);
    }
    return x;
}

/// One-hot labels, one sample per column.
inline Matrix target_matrix(const Dataset& dataset) {
    Matrix t = Matrix::Zero(kNumClasses, static_cast<Eigen::Index>(dataset.size()));
    for (std::size_t c = 0; c < dataset.size(); ++c) {
        const auto hot = one_hot(dataset.samples[c].k_label);
        t.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector>(hot.data(), kNumClasses);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Model files

inline std::string model_to_string(const MlpParameters& params) {
    params.validate();
    const auto dims = params.dims();
    std::string out = "kfactor-mlp 1\n";
    out += "input " + std::to_string(dims.input) + "\n";
    out += "hidden " + std::to_string(dims.hidden) + "\n";
    out += "output " + std::to_string(dims.output) + "\n";
    out += "activation " + std::string(to_string(params.hidden_activation)) + "\n";
    const Vector flat = params.flatten();
    char buf[40];
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", flat[i]);
        out += buf;
    }
    return out;
}

inline MlpParameters model_from_string(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string magic;
    int version = 0;
    in >> magic >> version;
    detail::require(magic == "kfactor-mlp" && version == 1, "model file: unrecognized header");

    auto read_field = [&](const char* name) {
        std::string key;
        in >> key;
        detail::require(key == name, std::string("model file: expected field '") + name + "'");
    };
    MlpDims dims;
    std::string activation;
    read_field("input");
    in >> dims.input;
    read_field("hidden");
    in >> dims.hidden;
    read_field("output");
    in >> dims.output;
    read_field("activation");
    in >> activation;
    detail::require(static_cast<bool>(in), "model file: truncated header");
    detail::require(dims.output == kNumClasses, "model file: output layer must have 11 units");

    MlpParameters params(dims, parse_activation(activation));
    Vector flat(params.parameter_count());
    std::string token;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        detail::require(static_cast<bool>(in >> token), "model file: fewer parameter values than the header implies");
        detail::require(detail::parse_number(std::string_view(token), flat[i]) && std::isfinite(flat[i]),
                        "model file: invalid parameter value '" + token + "'");
    }
    detail::require(!(in >> token), "model file: trailing data after parameter values");
    params.assign(flat);
    return params;
}

inline void save_model(const MlpParameters& params, const std::string& path) {
    detail::write_file(path, model_to_string(params));
}

inline MlpParameters load_model(const std::string& path) { return model_from_string(detail::read_file(path)); }

}  // namespace kfactor
