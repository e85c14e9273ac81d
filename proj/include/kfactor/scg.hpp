#pragma once

// Scaled conjugate gradient minimization (Moller, 1993).
//
// Curvature along the search direction p is estimated by differencing the
// gradient over a short step sigma = sigma0/|p|. The scale parameter lambda
// regularizes that estimate: it is raised when the curvature is negative or
// the quadratic model predicts the decrease poorly, and lowered when the
// prediction is good. A trial step is accepted only when the comparison
// ratio is non-negative, i.e. when the objective did not increase.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "kfactor/error.hpp"

namespace kfactor {

enum class StopReason { none, max_epochs, min_gradient, validation_failures, objective_floor };

inline std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::none: return "none";
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::min_gradient: return "min_gradient";
        case StopReason::validation_failures: return "validation_failures";
        case StopReason::objective_floor: return "objective_floor";
    }
    return "none";
}

/// One row per recorded point: the starting point (iteration 0) and every
/// accepted step. val_loss is NaN when no validation monitor is attached.
struct TrainingHistory {
    std::vector<int> iteration;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> grad_norm;
    std::vector<double> lambda;
    StopReason stop_reason = StopReason::none;
    int iterations = 0;
    int accepted_steps = 0;

    [[nodiscard]] std::size_t size() const noexcept { return iteration.size(); }

    void record(int iter, double loss, double val, double gnorm, double lam) {
        iteration.push_back(iter);
        train_loss.push_back(loss);
        val_loss.push_back(val);
        grad_norm.push_back(gnorm);
        lambda.push_back(lam);
    }

    friend bool operator==(const TrainingHistory&, const TrainingHistory&) = default;
};

/// `iteration,train_loss,val_loss,grad_norm` rows, then `stop_reason,<name>`.
inline std::string history_to_csv(const TrainingHistory& history) {
    std::string out = "iteration,train_loss,val_loss,grad_norm\n";
    char buf[128];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", history.iteration[i], history.train_loss[i],
                      history.val_loss[i], history.grad_norm[i]);
        out += buf;
    }
    out += "stop_reason," + std::string(to_string(history.stop_reason)) + "\n";
    return out;
}

struct ScgOptions {
    int max_epochs = 1000;
    double min_gradient_norm = 1e-6;
    double objective_floor = 1e-12;
    double sigma0 = 1e-5;
    double initial_lambda = 1e-6;
};

struct ObjectiveValue {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

using Objective = std::function<ObjectiveValue(const Eigen::VectorXd&)>;

struct MonitorVerdict {
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    bool stop = false;
};

/// Called on the starting point and after every accepted step.
using Monitor = std::function<MonitorVerdict(const Eigen::VectorXd&)>;

struct ScgState {
    double lambda = 1e-6;
    double lambda_bar = 0.0;
    bool success = true;
    Eigen::VectorXd direction;
    Eigen::VectorXd residual;  // negative gradient at the current point
    int iteration = 0;
    int accepted_steps = 0;
};

class ScgMinimizer {
public:
    ScgMinimizer(Objective objective, Eigen::VectorXd x0, const ScgOptions& options)
        : objective_(std::move(objective)), options_(options), x_(std::move(x0)) {
        detail::require(options_.sigma0 > 0.0 && options_.initial_lambda > 0.0,
                        "SCG: sigma0 and initial lambda must be positive");
        current_ = objective_(x_);
        detail::require(std::isfinite(current_.value) && current_.gradient.allFinite(),
                        "SCG: objective or gradient is not finite at the starting point");
        detail::require(current_.gradient.size() == x_.size(), "SCG: gradient length differs from parameters");
        state_.lambda = options_.initial_lambda;
        state_.residual = -current_.gradient;
        state_.direction = state_.residual;
    }

    [[nodiscard]] const Eigen::VectorXd& x() const noexcept { return x_; }
    [[nodiscard]] double value() const noexcept { return current_.value; }
    [[nodiscard]] double gradient_norm() const { return current_.gradient.norm(); }
    [[nodiscard]] const ScgState& state() const noexcept { return state_; }

    /// One SCG iteration. Returns true when the trial step was accepted.
    bool step() {
        ++state_.iteration;
        Eigen::VectorXd& p = state_.direction;
        const Eigen::VectorXd& r = state_.residual;
        const double p_sq = p.squaredNorm();
        if (p_sq == 0.0) {
            state_.success = false;
            return false;
        }

        if (state_.success) {
            const double sigma = options_.sigma0 / std::sqrt(p_sq);
            const ObjectiveValue probe = objective_(x_ + sigma * p);
            curvature_ = p.dot(probe.gradient - current_.gradient) / sigma;
        }

        double delta = curvature_ + (state_.lambda - state_.lambda_bar) * p_sq;
        if (delta <= 0.0) {
            // Force a positive definite local model.
            state_.lambda_bar = 2.0 * (state_.lambda - delta / p_sq);
            delta = -delta + state_.lambda * p_sq;
            state_.lambda = state_.lambda_bar;
        }

        const double mu = p.dot(r);
        const double alpha = mu / delta;
        Eigen::VectorXd trial_x = x_ + alpha * p;
        ObjectiveValue trial = objective_(trial_x);
        double comparison = -1.0;
        if (std::isfinite(trial.value) && trial.gradient.allFinite() && mu != 0.0) {
            comparison = 2.0 * delta * (current_.value - trial.value) / (mu * mu);
        }

        const bool accepted = comparison >= 0.0;
        if (accepted) {
            x_ = std::move(trial_x);
            current_ = std::move(trial);
            const Eigen::VectorXd r_new = -current_.gradient;
            state_.lambda_bar = 0.0;
            state_.success = true;
            ++state_.accepted_steps;
            if (state_.accepted_steps % static_cast<int>(x_.size()) == 0) {
                p = r_new;
            } else {
                const double beta = (r_new.squaredNorm() - r_new.dot(r)) / mu;
                p = r_new + beta * p;
            }
            state_.residual = r_new;
            if (comparison >= 0.75) state_.lambda *= 0.25;
        } else {
            state_.lambda_bar = state_.lambda;
            state_.success = false;
        }

        if (comparison < 0.25) state_.lambda += delta * (1.0 - comparison) / p_sq;
        state_.lambda = std::clamp(state_.lambda, kLambdaMin, kLambdaMax);
        return accepted;
    }

private:
    static constexpr double kLambdaMin = 1e-15;
    static constexpr double kLambdaMax = 1e100;

    Objective objective_;
    ScgOptions options_;
    Eigen::VectorXd x_;
    ObjectiveValue current_;
    ScgState state_;
    double curvature_ = 0.0;
};

struct ScgResult {
    Eigen::VectorXd x;
    TrainingHistory history;
};

/// Runs SCG until one of: iteration budget, gradient-norm floor, objective
/// floor, or the monitor asks to stop. Returns the final accepted point.
inline ScgResult scg_minimize(const Objective& objective, Eigen::VectorXd x0, const ScgOptions& options,
                              const Monitor& monitor = {}) {
    ScgMinimizer scg(objective, std::move(x0), options);
    TrainingHistory history;

    auto observe = [&](int iter) {
        const MonitorVerdict verdict = monitor ? monitor(scg.x()) : MonitorVerdict{};
        history.record(iter, scg.value(), verdict.val_loss, scg.gradient_norm(), scg.state().lambda);
        return verdict.stop;
    };
    auto converged = [&]() -> StopReason {
        if (scg.gradient_norm() < options.min_gradient_norm) return StopReason::min_gradient;
        if (scg.value() <= options.objective_floor) return StopReason::objective_floor;
        return StopReason::none;
    };

    bool stop_requested = observe(0);
    StopReason reason = stop_requested ? StopReason::validation_failures : converged();
    while (reason == StopReason::none) {
        if (scg.state().iteration >= options.max_epochs) {
            reason = StopReason::max_epochs;
            break;
        }
        if (scg.step()) {
            if (observe(scg.state().iteration)) {
                reason = StopReason::validation_failures;
                break;
            }
            reason = converged();
        } else if (scg.state().direction.squaredNorm() == 0.0) {
            reason = StopReason::min_gradient;
        }
    }

    history.stop_reason = reason;
    history.iterations = scg.state().iteration;
    history.accepted_steps = scg.state().accepted_steps;
    return {scg.x(), std::move(history)};
}

}  // namespace kfactor
