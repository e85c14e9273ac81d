#pragma once

// Channel realization -> per-subcarrier SNR -> EESM effective SNR -> CQI.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kfactor/channel.hpp"
#include "kfactor/error.hpp"

namespace kfactor {

inline constexpr std::size_t kCqiLevels = 15;

/// Default SNR thresholds (dB) for CQI 1..15.
inline const std::vector<double>& default_cqi_thresholds_db() {
    static const std::vector<double> thresholds{-6.7, -4.7, -2.3, 0.2,  2.4,  4.3,  5.9, 8.1,
                                                10.3, 11.7, 14.1, 16.3, 18.7, 21.0, 22.7};
    return thresholds;
}

/// `count` subcarriers placed symmetrically around DC, DC excluded:
/// 1..count/2 followed by fft_size-count/2..fft_size-1.
inline std::vector<int> centered_subcarriers(int fft_size, int count) {
    detail::require(count > 0 && count % 2 == 0, "used subcarrier count must be positive and even");
    detail::require(count < fft_size, "used subcarrier count must be below fft_size");
    std::vector<int> indices;
    indices.reserve(static_cast<std::size_t>(count));
    const int half = count / 2;
    for (int n = 1; n <= half; ++n) indices.push_back(n);
    for (int n = fft_size - half; n < fft_size; ++n) indices.push_back(n);
    return indices;
}

struct LinkMapConfig {
    int fft_size = 1024;
    double sample_rate_hz = 15.36e6;
    std::vector<int> used_subcarriers = centered_subcarriers(1024, 600);
    double beta = 0.5;
    std::vector<double> cqi_thresholds_db = default_cqi_thresholds_db();

    void validate() const {
        detail::require(fft_size > 0, "fft_size must be positive");
        detail::require(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz), "sample_rate_hz must be positive");
        detail::require(beta > 0.0 && beta <= 1.0, "beta must lie in (0, 1]");
        detail::require(!used_subcarriers.empty(), "used_subcarriers must not be empty");
        detail::require(used_subcarriers.size() <= static_cast<std::size_t>(fft_size),
                        "used_subcarriers cannot exceed fft_size entries");
        std::vector<int> sorted = used_subcarriers;
        std::sort(sorted.begin(), sorted.end());
        detail::require(sorted.front() >= 0 && sorted.back() < fft_size,
                        "used_subcarriers indices must lie in [0, fft_size)");
        detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                        "used_subcarriers indices must be unique");
        detail::require(cqi_thresholds_db.size() == kCqiLevels, "cqi_thresholds_db must have 15 entries");
        for (std::size_t i = 1; i < cqi_thresholds_db.size(); ++i) {
            detail::require(cqi_thresholds_db[i] > cqi_thresholds_db[i - 1],
                            "cqi_thresholds_db must be strictly increasing");
        }
    }
};

/// Nearest sample index of a delay, ties rounded away from zero.
inline int delay_to_sample_index(double delay_us, double sample_rate_hz) {
    detail::require(delay_us >= 0.0 && std::isfinite(delay_us), "delay must be non-negative");
    detail::require(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz), "sample rate must be positive");
    return static_cast<int>(std::round(delay_us * 1e-6 * sample_rate_hz));
}

inline std::vector<int> delay_samples(const PowerDelayProfile& pdp, double sample_rate_hz) {
    std::vector<int> samples;
    samples.reserve(pdp.size());
    for (double d : pdp.delays_us) samples.push_back(delay_to_sample_index(d, sample_rate_hz));
    for (std::size_t l = 1; l < samples.size(); ++l) {
        detail::require(samples[l] > samples[l - 1],
                        "two taps collapse onto the same sample index at this sample rate");
    }
    return samples;
}

namespace detail {

// exp(-j 2 pi n d / N) with the phase reduced modulo N in integers.
inline Complex dft_twiddle(long long n, long long d, long long fft_size) {
    const long long phase_index = (n * d) % fft_size;
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(phase_index) / static_cast<double>(fft_size);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace detail

/// H_n = sum_l h_l exp(-j 2 pi n d_l / fft_size) at the given subcarrier indices.
inline std::vector<Complex> freq_response(const ChannelRealization& realization, int fft_size,
                                          std::span<const int> subcarriers) {
    detail::require(realization.taps.size() == realization.delay_samples.size(),
                    "freq_response: taps and delays differ in length");
    for (int d : realization.delay_samples) {
        detail::require(d >= 0 && d < fft_size, "freq_response: tap delay index outside the FFT window");
    }
    std::vector<Complex> response;
    response.reserve(subcarriers.size());
    for (int n : subcarriers) {
        Complex acc{0.0, 0.0};
        for (std::size_t l = 0; l < realization.taps.size(); ++l) {
            acc += realization.taps[l] * detail::dft_twiddle(n, realization.delay_samples[l], fft_size);
        }
        response.push_back(acc);
    }
    return response;
}

inline std::vector<Complex> freq_response(const ChannelRealization& realization, const LinkMapConfig& config) {
    return freq_response(realization, config.fft_size, config.used_subcarriers);
}

/// Precomputed DFT columns for a fixed delay set, for repeated evaluation
/// over many realizations that share delays.
class FrequencyKernel {
public:
    FrequencyKernel(std::span<const int> delay_samples, int fft_size, std::span<const int> subcarriers)
        : taps_(delay_samples.size()), subcarriers_(subcarriers.size()) {
        for (int d : delay_samples) {
            detail::require(d >= 0 && d < fft_size, "FrequencyKernel: tap delay index outside the FFT window");
        }
        twiddles_.reserve(taps_ * subcarriers_);
        for (int n : subcarriers) {
            for (int d : delay_samples) twiddles_.push_back(detail::dft_twiddle(n, d, fft_size));
        }
    }

    [[nodiscard]] std::size_t subcarriers() const noexcept { return subcarriers_; }

    /// Writes |H_n|^2 for every subcarrier into `out`.
    void power_response(std::span<const Complex> taps, std::span<double> out) const {
        detail::require(taps.size() == taps_, "FrequencyKernel: tap count mismatch");
        detail::require(out.size() == subcarriers_, "FrequencyKernel: output size mismatch");
        const Complex* row = twiddles_.data();
        for (std::size_t n = 0; n < subcarriers_; ++n, row += taps_) {
            // Explicit real arithmetic; std::complex multiply carries NaN-recovery branches.
            double re = 0.0;
            double im = 0.0;
            for (std::size_t l = 0; l < taps_; ++l) {
                re += taps[l].real() * row[l].real() - taps[l].imag() * row[l].imag();
                im += taps[l].real() * row[l].imag() + taps[l].imag() * row[l].real();
            }
            out[n] = re * re + im * im;
        }
    }

private:
    std::size_t taps_;
    std::size_t subcarriers_;
    std::vector<Complex> twiddles_;
};

/// Noise variance 10^(-snr_db/10) for unit transmit and channel power.
inline double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

inline std::vector<double> subcarrier_snrs(std::span<const Complex> response, double snr_db) {
    const double n0 = noise_variance(snr_db);
    std::vector<double> snrs;
    snrs.reserve(response.size());
    for (const auto& h : response) snrs.push_back(std::norm(h) / n0);
    return snrs;
}

/// EESM: beta * f^{-1}(mean_n f(SNR_n / beta)) with f(x) = e^{-x}, evaluated
/// as a log-sum-exp shifted by the smallest exponent so no term underflows
/// to zero before the log.
inline double effective_snr(std::span<const double> snrs, double beta) {
    detail::require(!snrs.empty(), "effective_snr: empty SNR vector");
    detail::require(beta > 0.0 && beta <= 1.0, "effective_snr: beta must lie in (0, 1]");
    const auto [lo, hi] = std::minmax_element(snrs.begin(), snrs.end());
    const double shift = *lo / beta;
    double sum = 0.0;
    for (double s : snrs) sum += std::exp(-(s / beta - shift));
    const double mean = sum / static_cast<double>(snrs.size());
    // Mathematically within [min, max]; the clamp only absorbs rounding.
    return std::clamp(beta * (shift - std::log(mean)), *lo, *hi);
}

/// Largest CQI i with thresholds[i-1] <= SNR_eff (dB); 0 below the table.
inline int quantize_cqi(double snr_eff_linear, std::span<const double> thresholds_db) {
    const double snr_db = 10.0 * std::log10(snr_eff_linear);
    const auto above = std::upper_bound(thresholds_db.begin(), thresholds_db.end(), snr_db);
    return static_cast<int>(above - thresholds_db.begin());
}

}  // namespace kfactor
