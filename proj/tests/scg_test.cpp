#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "kfactor/scg.hpp"
#include "kfactor/random.hpp"

using namespace kfactor;
using Eigen::VectorXd;

namespace {

VectorXd random_vector(Eigen::Index n, RandomStream& rng, double scale = 1.0) {
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.gaussian();
    return v;
}

Objective shifted_quadratic(const VectorXd& c) {
    return [c](const VectorXd& x) { return ObjectiveValue{(x - c).squaredNorm(), 2.0 * (x - c)}; };
}

// Extended Rosenbrock: non-convex, exercises negative-curvature handling.
ObjectiveValue rosenbrock(const VectorXd& x) {
    ObjectiveValue out{0.0, VectorXd::Zero(x.size())};
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i + 1] - x[i] * x[i];
        const double b = 1.0 - x[i];
        out.value += 100.0 * a * a + b * b;
        out.gradient[i] += -400.0 * x[i] * a - 2.0 * b;
        out.gradient[i + 1] += 200.0 * a;
    }
    return out;
}

void expect_sound_history(const TrainingHistory& h) {
    ASSERT_GE(h.size(), 1u);
    for (std::size_t i = 1; i < h.size(); ++i) {
        EXPECT_LE(h.train_loss[i], h.train_loss[i - 1]) << "row " << i;
        EXPECT_GT(h.iteration[i], h.iteration[i - 1]);
    }
    for (double lam : h.lambda) {
        EXPECT_GT(lam, 0.0);
        EXPECT_TRUE(std::isfinite(lam));
    }
    EXPECT_NE(h.stop_reason, StopReason::none);
}

}  // namespace

TEST(Scg, QuadraticInFiftyDimensions) {
    RandomStream rng(1);
    const VectorXd c = random_vector(50, rng, 3.0);
    ScgOptions o;
    o.max_epochs = 200;
    o.min_gradient_norm = 1e-9;
    o.objective_floor = -std::numeric_limits<double>::infinity();
    const auto result = scg_minimize(shifted_quadratic(c), random_vector(50, rng, 3.0), o);
    EXPECT_LT(2.0 * (result.x - c).norm(), 1e-8);
    EXPECT_LT((result.x - c).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(result.history.iterations, 200);
    EXPECT_EQ(result.history.stop_reason, StopReason::min_gradient);
    expect_sound_history(result.history);
}

TEST(Scg, IllConditionedQuadratic) {
    RandomStream rng(2);
    VectorXd scale(30);
    for (Eigen::Index i = 0; i < scale.size(); ++i) scale[i] = std::pow(10.0, 3.0 * i / 29.0);
    const VectorXd c = random_vector(30, rng);
    Objective f = [&](const VectorXd& x) {
        const VectorXd d = x - c;
        return ObjectiveValue{d.cwiseProduct(scale).dot(d), 2.0 * scale.cwiseProduct(d)};
    };
    ScgOptions o;
    o.max_epochs = 2000;
    o.min_gradient_norm = 1e-8;
    o.objective_floor = -std::numeric_limits<double>::infinity();
    const auto result = scg_minimize(f, VectorXd::Zero(30), o);
    EXPECT_EQ(result.history.stop_reason, StopReason::min_gradient);
    EXPECT_LT((result.x - c).norm(), 1e-8);
    expect_sound_history(result.history);
}

TEST(Scg, AlreadyAtMinimum) {
    RandomStream rng(3);
    const VectorXd c = random_vector(10, rng);
    const auto result = scg_minimize(shifted_quadratic(c), c, ScgOptions{});
    EXPECT_EQ(result.x, c);
    EXPECT_EQ(result.history.stop_reason, StopReason::min_gradient);
    EXPECT_EQ(result.history.accepted_steps, 0);
    EXPECT_EQ(result.history.size(), 1u);
}

TEST(Scg, ZeroBudgetReturnsStartingPoint) {
    RandomStream rng(4);
    const VectorXd x0 = random_vector(5, rng);
    ScgOptions o;
    o.max_epochs = 0;
    const auto result = scg_minimize(shifted_quadratic(VectorXd::Zero(5)), x0, o);
    EXPECT_EQ(result.x, x0);
    EXPECT_EQ(result.history.stop_reason, StopReason::max_epochs);
}

TEST(Scg, NonConvexDescentIsMonotone) {
    RandomStream rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        ScgOptions o;
        o.max_epochs = 300;
        const auto result = scg_minimize(rosenbrock, random_vector(8, rng, 1.5), o);
        expect_sound_history(result.history);
        EXPECT_LT(result.history.train_loss.back(), result.history.train_loss.front());
    }
}

TEST(Scg, RosenbrockConverges) {
    ScgOptions o;
    o.max_epochs = 5000;
    o.min_gradient_norm = 1e-7;
    VectorXd x0 = VectorXd::Constant(4, -1.2);
    const auto result = scg_minimize(rosenbrock, x0, o);
    EXPECT_TRUE(result.history.stop_reason == StopReason::min_gradient ||
                result.history.stop_reason == StopReason::objective_floor);
    EXPECT_LT((result.x - VectorXd::Ones(4)).norm(), 1e-5);
    expect_sound_history(result.history);
}

TEST(Scg, ObjectiveFloorStops) {
    RandomStream rng(6);
    ScgOptions o;
    o.min_gradient_norm = 0.0;
    o.objective_floor = 1e-6;
    const auto result = scg_minimize(shifted_quadratic(VectorXd::Zero(4)), random_vector(4, rng), o);
    EXPECT_EQ(result.history.stop_reason, StopReason::objective_floor);
    EXPECT_LE(result.history.train_loss.back(), 1e-6);
}

TEST(Scg, MonitorCanStop) {
    RandomStream rng(7);
    int calls = 0;
    Monitor m = [&](const VectorXd&) {
        ++calls;
        return MonitorVerdict{static_cast<double>(calls), calls >= 3};
    };
    ScgOptions o;
    o.min_gradient_norm = 0.0;
    o.objective_floor = -1.0;
    const auto result = scg_minimize(rosenbrock, random_vector(6, rng), o, m);
    EXPECT_EQ(result.history.stop_reason, StopReason::validation_failures);
    EXPECT_EQ(calls, 3);
    EXPECT_EQ(result.history.val_loss, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Scg, RejectsNonFiniteStart) {
    Objective bad = [](const VectorXd& x) {
        return ObjectiveValue{std::numeric_limits<double>::quiet_NaN(), VectorXd::Zero(x.size())};
    };
    EXPECT_THROW(scg_minimize(bad, VectorXd::Zero(3), ScgOptions{}), ValidationError);
}

TEST(Scg, HistoryCsv) {
    TrainingHistory h;
    h.record(0, 2.5, 3.0, 0.5, 1e-6);
    h.record(4, 1.25, 2.0, 0.25, 1e-6);
    h.stop_reason = StopReason::max_epochs;
    EXPECT_EQ(history_to_csv(h), "iteration,train_loss,val_loss,grad_norm\n0,2.5,3,0.5\n4,1.25,2,0.25\nstop_reason,max_epochs\n");
}
