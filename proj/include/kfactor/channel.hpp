#pragma once

// Ricean multipath channel generation.
//
// Each tap l of the tapped delay line carries a fixed line-of-sight term
// P_l e^{j phi_l} plus a circularly-symmetric complex Gaussian diffuse term
// of variance 2 sigma_l^2. All taps share one K-factor, K = P_l^2 / 2 sigma_l^2,
// and the tap powers E_l = P_l^2 + 2 sigma_l^2 sum to one.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kfactor/error.hpp"
#include "kfactor/random.hpp"

namespace kfactor {

using Complex = std::complex<double>;

struct PowerDelayProfile {
    std::vector<double> delays_us;
    std::vector<double> powers;

    [[nodiscard]] std::size_t size() const noexcept { return powers.size(); }
};

struct RiceanTapParams {
    double power = 0.0;
    double los_amplitude = 0.0;
    double los_phase = 0.0;
    double diffuse_variance = 0.0;
};

struct ChannelRealization {
    std::vector<Complex> taps;
    std::vector<int> delay_samples;
};

/// ITU Pedestrian B tap delays in microseconds.
inline const std::vector<double>& pedestrian_b_delays_us() {
    static const std::vector<double> delays{0.0, 0.2, 0.8, 1.2, 2.3, 3.7};
    return delays;
}

/// ITU Pedestrian B tap gains in dB.
inline const std::vector<double>& pedestrian_b_gains_db() {
    static const std::vector<double> gains{0.0, -0.9, -4.9, -8.0, -7.8, -23.9};
    return gains;
}

/// Converts dB gains to linear powers and renormalizes them to unit sum.
inline PowerDelayProfile normalize_pdp(std::span<const double> delays_us, std::span<const double> gains_db) {
    detail::require(!delays_us.empty(), "power delay profile must have at least one tap");
    detail::require(delays_us.size() == gains_db.size(),
                    "power delay profile: delays_us and gains_db differ in length");
    detail::require(delays_us[0] >= 0.0 && std::isfinite(delays_us[0]),
                    "power delay profile: first delay must be non-negative");
    for (std::size_t l = 1; l < delays_us.size(); ++l) {
        detail::require(delays_us[l] > delays_us[l - 1] && std::isfinite(delays_us[l]),
                        "power delay profile: delays must be strictly increasing");
    }

    PowerDelayProfile pdp;
    pdp.delays_us.assign(delays_us.begin(), delays_us.end());
    pdp.powers.reserve(gains_db.size());
    double total = 0.0;
    for (double gain : gains_db) {
        detail::require(std::isfinite(gain), "power delay profile: gains must be finite");
        pdp.powers.push_back(std::pow(10.0, gain / 10.0));
        total += pdp.powers.back();
    }
    for (double& p : pdp.powers) p /= total;
    return pdp;
}

inline PowerDelayProfile pedestrian_b() { return normalize_pdp(pedestrian_b_delays_us(), pedestrian_b_gains_db()); }

/// Splits each tap power into LoS amplitude and diffuse variance for a common K.
inline std::vector<RiceanTapParams> tap_params(const PowerDelayProfile& pdp, double k, std::span<const double> phases) {
    detail::require(std::isfinite(k) && k >= 0.0, "K-factor must be finite and non-negative");
    detail::require(phases.size() == pdp.size(), "tap_params: one LoS phase per tap required");

    std::vector<RiceanTapParams> taps(pdp.size());
    for (std::size_t l = 0; l < taps.size(); ++l) {
        const double e = pdp.powers[l];
        taps[l].power = e;
        taps[l].los_amplitude = std::sqrt(k * e / (k + 1.0));
        taps[l].los_phase = phases[l];
        taps[l].diffuse_variance = e / (k + 1.0);
    }
    return taps;
}

/// One LoS phase per tap, uniform on [0, 2pi).
inline std::vector<double> draw_los_phases(std::size_t taps, RandomStream& rng) {
    std::vector<double> phases(taps);
    for (double& phi : phases) phi = 2.0 * std::numbers::pi * rng.uniform();
    return phases;
}

/// Draws one block-fading epoch. LoS terms are fixed; diffuse terms are fresh.
inline ChannelRealization draw_epoch(std::span<const RiceanTapParams> taps, std::span<const int> delay_samples,
                                     RandomStream& rng) {
    detail::require(taps.size() == delay_samples.size(), "draw_epoch: taps and delays differ in length");
    ChannelRealization out;
    out.delay_samples.assign(delay_samples.begin(), delay_samples.end());
    out.taps.reserve(taps.size());
    for (const auto& tap : taps) {
        const double component_std = std::sqrt(0.5 * tap.diffuse_variance);
        const double re = rng.gaussian();
        const double im = rng.gaussian();
        out.taps.push_back(std::polar(tap.los_amplitude, tap.los_phase) + Complex(component_std * re, component_std * im));
    }
    return out;
}

/// Moment estimate |mean|^2 / unbiased variance; +infinity when the variance vanishes.
inline double estimate_k_moments(std::span<const Complex> samples) {
    detail::require(samples.size() >= 2, "estimate_k_moments needs at least two samples");
    Complex mean{0.0, 0.0};
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    double spread = 0.0;
    for (const auto& s : samples) spread += std::norm(s - mean);
    const double variance = spread / static_cast<double>(samples.size() - 1);
    if (variance == 0.0) return std::numeric_limits<double>::infinity();
    return std::norm(mean) / variance;
}

}  // namespace kfactor
