#include <gtest/gtest.h>

#include <cmath>

#include "kfactor/mlp.hpp"

using namespace kfactor;

namespace {

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
    return m;
}

Matrix random_one_hot(Eigen::Index cols, RandomStream& rng) {
    Matrix t = Matrix::Zero(kNumClasses, cols);
    for (Eigen::Index c = 0; c < cols; ++c) t(static_cast<Eigen::Index>(rng.below(kNumClasses)), c) = 1.0;
    return t;
}

MlpParameters random_params(MlpDims dims, Activation a, RandomStream& rng) {
    MlpParameters p(dims, a);
    p.assign(random_matrix(p.parameter_count(), 1, rng, 0.7).col(0));
    return p;
}

// Central differences of a scalar function of the flat parameter vector.
template <typename F>
Vector central_differences(F&& f, const Vector& x, double step = 1e-6) {
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double up = f(probe);
        probe[i] = x[i] - step;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

double relative_error(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

}  // namespace

TEST(Forward, ZeroParametersGiveUniform) {
    const MlpParameters p({5, 4, kNumClasses}, Activation::tanh);
    const auto out = forward(p, Vector::Ones(5));
    for (Eigen::Index i = 0; i < out.probabilities.size(); ++i) EXPECT_NEAR(out.probabilities[i], 1.0 / 11.0, 1e-15);
}

TEST(Forward, ProbabilitiesFormDistribution) {
    RandomStream rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        const auto p = random_params({6, 5, kNumClasses}, Activation::tanh, rng);
        const auto out = forward(p, random_matrix(6, 1, rng).col(0));
        EXPECT_NEAR(out.probabilities.sum(), 1.0, 1e-12);
        EXPECT_GT(out.probabilities.minCoeff(), 0.0);
    }
}

TEST(Forward, LogitShiftInvariance) {
    RandomStream rng(2);
    auto p = random_params({4, 3, kNumClasses}, Activation::tanh, rng);
    const Vector x = random_matrix(4, 1, rng).col(0);
    const auto before = forward(p, x).probabilities;
    p.b2.array() += 123.0;
    EXPECT_LT((forward(p, x).probabilities - before).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, ExtremeLogitsStayFinite) {
    MlpParameters p({1, 1, kNumClasses}, Activation::tanh);
    for (int i = 0; i < kNumClasses; ++i) p.b2[i] = (i % 2 ? 1e4 : -1e4) + i;
    const auto out = forward(p, Vector::Zero(1));
    EXPECT_TRUE(out.probabilities.allFinite());
    EXPECT_NEAR(out.probabilities.sum(), 1.0, 1e-12);
}

TEST(Forward, TanhHiddenLayerIsOdd) {
    RandomStream rng(3);
    auto p = random_params({5, 4, kNumClasses}, Activation::tanh, rng);
    p.b1.setZero();
    const Vector x = random_matrix(5, 1, rng).col(0);
    EXPECT_LT((forward(p, x).hidden + forward(p, -x).hidden).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, RejectsBadInput) {
    const MlpParameters p({3, 2, kNumClasses}, Activation::tanh);
    EXPECT_THROW(forward(p, Vector::Zero(4)), ValidationError);
    Vector x = Vector::Zero(3);
    x[1] = std::nan("");
    EXPECT_THROW(forward(p, x), ValidationError);
}

TEST(Forward, BatchMatchesSingleAndIsOrderIndependent) {
    RandomStream rng(4);
    const auto p = random_params({5, 4, kNumClasses}, Activation::logistic, rng);
    const Matrix x = random_matrix(5, 8, rng);
    const Matrix probs = forward_batch(p, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        EXPECT_LT((probs.col(c) - forward(p, x.col(c)).probabilities).cwiseAbs().maxCoeff(), 1e-14);
    }
    const Matrix reversed = x.rowwise().reverse();
    EXPECT_LT((forward_batch(p, reversed).rowwise().reverse() - probs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CrossEntropy, Values) {
    const Vector uniform = Vector::Constant(kNumClasses, 1.0 / kNumClasses);
    const auto target = one_hot(3);
    const Vector t = Eigen::Map<const Vector>(target.data(), kNumClasses);
    EXPECT_NEAR(cross_entropy(uniform, t), 2.3978952727983707, 1e-12);
    Vector sharp = Vector::Constant(kNumClasses, 1e-9);
    sharp[3] = 1.0 - 10e-9;
    EXPECT_NEAR(cross_entropy(sharp, t), 0.0, 1e-7);
    EXPECT_GE(cross_entropy(sharp, t), 0.0);
    Vector zero = Vector::Zero(kNumClasses);
    zero[0] = 1.0;
    EXPECT_NEAR(cross_entropy(zero, t), -std::log(1e-300), 1e-9);
    EXPECT_THROW(cross_entropy(Vector::Zero(3), t), ValidationError);
}

TEST(Gradient, MatchesFiniteDifferencesOnSmallInstance) {
    RandomStream rng(5);
    const auto p = random_params({5, 4, kNumClasses}, Activation::tanh, rng);
    const Matrix x = random_matrix(5, 7, rng);
    const Matrix t = random_one_hot(7, rng);
    const Vector analytic = gradient(p, x, t);
    const Vector numeric = central_differences(
        [&](const Vector& flat) {
            auto q = p;
            q.assign(flat);
            return mean_cross_entropy(q, x, t);
        },
        p.flatten());
    EXPECT_LT(relative_error(analytic, numeric), 1e-5);
}

TEST(Gradient, RandomizedFiniteDifferenceProperty) {
    RandomStream rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const Activation a = trial % 2 ? Activation::logistic : Activation::tanh;
        const MlpDims dims{1 + static_cast<int>(rng.below(6)), 1 + static_cast<int>(rng.below(5)), kNumClasses};
        const auto p = random_params(dims, a, rng);
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.below(6));
        const Matrix x = random_matrix(dims.input, batch, rng);
        const Matrix t = random_one_hot(batch, rng);
        const Vector numeric = central_differences(
            [&](const Vector& flat) {
                auto q = p;
                q.assign(flat);
                return mean_cross_entropy(q, x, t);
            },
            p.flatten());
        ASSERT_LT(relative_error(gradient(p, x, t), numeric), 1e-5) << "trial " << trial;
    }
}

TEST(Gradient, ReluAwayFromKinks) {
    RandomStream rng(7);
    auto p = random_params({4, 6, kNumClasses}, Activation::relu, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix pre = (p.w1 * x).colwise() + p.b1;
    ASSERT_GT(pre.cwiseAbs().minCoeff(), 1e-4);
    const Matrix t = random_one_hot(5, rng);
    const Vector numeric_t = central_differences(
        [&](const Vector& flat) {
            auto q = p;
            q.assign(flat);
            return mean_cross_entropy(q, x, t);
        },
        p.flatten());
    EXPECT_LT(relative_error(gradient(p, x, t), numeric_t), 1e-5);
}

TEST(Gradient, OutputBiasAtZero) {
    const MlpParameters p({3, 2, kNumClasses}, Activation::tanh);
    RandomStream rng(8);
    const Matrix x = Matrix::Zero(3, 6);
    const Matrix t = random_one_hot(6, rng);
    const Vector g = gradient(p, x, t);
    const Vector g_b2 = g.tail(kNumClasses);
    const Vector expected = Vector::Constant(kNumClasses, 1.0 / kNumClasses) - t.rowwise().mean();
    EXPECT_LT((g_b2 - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gradient, DuplicatedBatchSameMean) {
    RandomStream rng(9);
    const auto p = random_params({4, 3, kNumClasses}, Activation::tanh, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix t = random_one_hot(5, rng);
    Matrix x2(4, 10), t2(kNumClasses, 10);
    x2 << x, x;
    t2 << t, t;
    EXPECT_LT((gradient(p, x, t) - gradient(p, x2, t2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradient, RejectsMismatch) {
    const MlpParameters p({3, 2, kNumClasses}, Activation::tanh);
    EXPECT_THROW(gradient(p, Matrix::Zero(4, 2), Matrix::Zero(11, 2)), ValidationError);
    EXPECT_THROW(gradient(p, Matrix::Zero(3, 2), Matrix::Zero(11, 3)), ValidationError);
    EXPECT_THROW(gradient(p, Matrix::Zero(3, 2), Matrix::Zero(10, 2)), ValidationError);
}

TEST(Flatten, CanonicalOrder) {
    MlpParameters p({2, 2, kNumClasses}, Activation::tanh);
    p.w1 << 1, 2, 3, 4;
    p.b1 << 5, 6;
    const Vector flat = p.flatten();
    EXPECT_EQ(flat.head(6), (Vector(6) << 1, 2, 3, 4, 5, 6).finished());
    p.w2(0, 1) = 9.0;
    EXPECT_EQ(p.flatten()[7], 9.0);
    p.b2[10] = 7.0;
    EXPECT_EQ(p.flatten()[p.parameter_count() - 1], 7.0);
}

TEST(InitRandom, RangesSeedsAndSymmetryBreaking) {
    const MlpDims dims{500, 100, kNumClasses};
    RandomStream a(1), b(1), c(2);
    const auto p = init_random(dims, Activation::tanh, a);
    const auto q = init_random(dims, Activation::tanh, b);
    const auto r = init_random(dims, Activation::tanh, c);
    EXPECT_TRUE(p == q);
    EXPECT_FALSE(p == r);
    const double r1 = std::sqrt(6.0 / 600.0), r2 = std::sqrt(6.0 / 111.0);
    EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), r1);
    EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), r2);
    EXPECT_GT(p.w1.cwiseAbs().maxCoeff(), 0.9 * r1);
    EXPECT_TRUE(p.b1.isZero());
    EXPECT_TRUE(p.b2.isZero());
    for (Eigen::Index i = 0; i < p.w1.rows(); ++i)
        for (Eigen::Index j = i + 1; j < p.w1.rows(); ++j) ASSERT_NE(p.w1.row(i), p.w1.row(j));
}

TEST(Autoencoder, IdentityReconstruction) {
    AutoencoderParams p(2, 2, Activation::relu);
    p.w1.setIdentity();
    p.w_dec.setIdentity();
    const Matrix x = (Matrix(2, 3) << 0.1, 0.5, 0.9, 0.2, 0.3, 0.7).finished();
    EXPECT_LT((ae_forward(p, x) - x).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(ae_loss_gradient(p, x).loss, 0.0);
}

TEST(Autoencoder, GradientMatchesFiniteDifferences) {
    RandomStream rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const int input = 1 + static_cast<int>(rng.below(6));
        const int hidden = 1 + static_cast<int>(rng.below(5));
        AutoencoderParams p(input, hidden, trial % 2 ? Activation::logistic : Activation::tanh);
        p.assign(random_matrix(p.parameter_count(), 1, rng, 0.7).col(0));
        const Matrix x = random_matrix(input, 1 + static_cast<Eigen::Index>(rng.below(6)), rng);
        const Vector numeric = central_differences(
            [&](const Vector& flat) {
                auto q = p;
                q.assign(flat);
                return (ae_forward(q, x) - x).squaredNorm() / static_cast<double>(x.size());
            },
            p.flatten());
        ASSERT_LT(relative_error(ae_loss_gradient(p, x).gradient, numeric), 1e-5) << "trial " << trial;
    }
}

TEST(Autoencoder, MseIndependentOfBatchOrder) {
    RandomStream rng(11);
    auto p = init_autoencoder(6, 3, Activation::tanh, rng);
    const Matrix x = random_matrix(6, 9, rng);
    EXPECT_NEAR(ae_loss_gradient(p, x).loss, ae_loss_gradient(p, x.rowwise().reverse()).loss, 1e-15);
}

TEST(ModelFile, RoundTripIsExact) {
    RandomStream rng(12);
    const auto p = init_random({7, 5, kNumClasses}, Activation::logistic, rng);
    const auto text = model_to_string(p);
    EXPECT_EQ(text.rfind("kfactor-mlp 1\ninput 7\nhidden 5\noutput 11\nactivation logistic\n", 0), 0u);
    const auto q = model_from_string(text);
    EXPECT_TRUE(p == q);
    EXPECT_EQ(model_to_string(q), text);
}

TEST(ModelFile, RejectsMalformed) {
    EXPECT_THROW(model_from_string("nonsense"), ValidationError);
    EXPECT_THROW(model_from_string("kfactor-mlp 1\ninput 1\nhidden 1\noutput 11\nactivation tanh\n0.5\n"),
                 ValidationError);
    EXPECT_THROW(model_from_string("kfactor-mlp 1\ninput 1\nhidden 1\noutput 11\nactivation cubic\n"),
                 ValidationError);
}
