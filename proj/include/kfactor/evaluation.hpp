#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "kfactor/dataset.hpp"
#include "kfactor/error.hpp"
#include "kfactor/mlp.hpp"

namespace kfactor {

/// Index of the largest entry; the lowest index wins ties.
inline int argmax(const Vector& v) {
    detail::require(v.size() > 0, "argmax of an empty vector");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return static_cast<int>(best);
}

inline int predict(const MlpParameters& model, std::span<const int> cqi) {
    detail::require(static_cast<Eigen::Index>(cqi.size()) == model.w1.cols(),
                    "predict: CQI vector length " + std::to_string(cqi.size()) + " does not match model input " +
                        std::to_string(model.w1.cols()));
    const auto x = normalize_inputs(cqi);
    return argmax(forward(model, Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()))).probabilities);
}

/// Rows are true labels, columns are predictions.
class ConfusionMatrix {
public:
    using Counts = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

    void add(int truth, int predicted) {
        detail::require(truth >= 0 && truth < kNumClasses && predicted >= 0 && predicted < kNumClasses,
                        "confusion matrix labels must lie in [0, 10]");
        ++counts_[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)];
    }

    [[nodiscard]] std::int64_t count(int truth, int predicted) const {
        return counts_.at(static_cast<std::size_t>(truth)).at(static_cast<std::size_t>(predicted));
    }
    [[nodiscard]] const Counts& counts() const noexcept { return counts_; }

    [[nodiscard]] std::int64_t total() const noexcept {
        std::int64_t t = 0;
        for (const auto& row : counts_)
            for (auto c : row) t += c;
        return t;
    }

    [[nodiscard]] std::int64_t trace() const noexcept {
        std::int64_t t = 0;
        for (std::size_t i = 0; i < counts_.size(); ++i) t += counts_[i][i];
        return t;
    }

    [[nodiscard]] std::int64_t row_sum(int truth) const {
        std::int64_t t = 0;
        for (auto c : counts_.at(static_cast<std::size_t>(truth))) t += c;
        return t;
    }

    /// trace / total. Undefined (throws) for an empty matrix.
    [[nodiscard]] double accuracy() const {
        const auto n = total();
        detail::require(n > 0, "accuracy of an empty confusion matrix is undefined");
        return static_cast<double>(trace()) / static_cast<double>(n);
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    Counts counts_{};
};

inline ConfusionMatrix confusion(const MlpParameters& model, const Dataset& test) {
    detail::require(!test.empty(), "cannot evaluate on an empty test set");
    ConfusionMatrix cm;
    for (const auto& s : test.samples) cm.add(s.k_label, predict(model, s.cqi));
    return cm;
}

/// 11 comma-separated rows of counts, then `accuracy,<value>`.
inline std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::string out;
    for (const auto& row : cm.counts()) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += std::to_string(row[j]);
        }
        out += '\n';
    }
    out += "accuracy," + detail::format_double(cm.accuracy()) + "\n";
    return out;
}

}  // namespace kfactor
