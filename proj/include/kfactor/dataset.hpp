#pragma once

// CQI data generation over a (K, SNR) grid, labeling, splitting and CSV I/O.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "kfactor/channel.hpp"
#include "kfactor/error.hpp"
#include "kfactor/link_quality.hpp"
#include "kfactor/random.hpp"

namespace kfactor {

inline constexpr int kNumClasses = 11;
inline constexpr int kMaxCqi = 15;

struct Sample {
    std::vector<int> cqi;
    int k_label = 0;
    double snr_db = 0.0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct GenerationGrid {
    std::vector<int> k_values{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<double> snr_db_values = [] {
        std::vector<double> v;
        for (int s = 1; s <= 25; ++s) v.push_back(s);
        return v;
    }();
    int reps = 10;
    int n = 100;

    [[nodiscard]] std::size_t total() const noexcept {
        return k_values.size() * snr_db_values.size() * static_cast<std::size_t>(reps);
    }

    void validate() const {
        detail::require(!k_values.empty(), "k_values must not be empty");
        detail::require(!snr_db_values.empty(), "snr_db_values must not be empty");
        detail::require(reps >= 1, "reps must be at least 1");
        detail::require(n >= 1, "n must be at least 1");
        for (int k : k_values) detail::require(k >= 0 && k < kNumClasses, "k_values entries must lie in [0, 10]");
        for (double s : snr_db_values) detail::require(std::isfinite(s), "snr_db_values entries must be finite");
    }
};

struct Dataset {
    std::vector<Sample> samples;
    int n = 0;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] bool empty() const noexcept { return samples.empty(); }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Runs the OFDM link for a fixed profile and configuration, turning channel
/// epochs into CQI sequences.
class CqiSampler {
public:
    CqiSampler(PowerDelayProfile pdp, LinkMapConfig config)
        : pdp_(std::move(pdp)),
          config_(validated(std::move(config))),
          delays_(delay_samples(pdp_, config_.sample_rate_hz)),
          kernel_(delays_, config_.fft_size, config_.used_subcarriers) {}

    [[nodiscard]] const PowerDelayProfile& profile() const noexcept { return pdp_; }
    [[nodiscard]] const LinkMapConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<int>& delays() const noexcept { return delays_; }

    /// One CQI from one channel epoch.
    [[nodiscard]] int epoch_cqi(std::span<const Complex> taps, double snr_db, std::vector<double>& scratch) const {
        scratch.resize(kernel_.subcarriers());
        kernel_.power_response(taps, scratch);
        const double inv_n0 = 1.0 / noise_variance(snr_db);
        for (double& s : scratch) s *= inv_n0;
        return quantize_cqi(effective_snr(scratch, config_.beta), config_.cqi_thresholds_db);
    }

    /// CQI sequence of length n for explicit tap parameters (LoS phases included).
    [[nodiscard]] std::vector<int> cqi_sequence(std::span<const RiceanTapParams> taps, double snr_db, int n,
                                                RandomStream& rng) const {
        detail::require(n >= 1, "CQI vector length must be at least 1");
        detail::require(taps.size() == delays_.size(), "tap parameter count does not match the profile");
        std::vector<int> cqi;
        cqi.reserve(static_cast<std::size_t>(n));
        std::vector<double> scratch;
        for (int t = 0; t < n; ++t) {
            const auto realization = draw_epoch(taps, delays_, rng);
            cqi.push_back(epoch_cqi(realization.taps, snr_db, scratch));
        }
        return cqi;
    }

    /// Draws LoS phases once, then n independent epochs.
    [[nodiscard]] Sample sample(int k, double snr_db, int n, RandomStream& rng) const {
        detail::require(k >= 0 && k < kNumClasses, "K label must lie in [0, 10]");
        const auto phases = draw_los_phases(pdp_.size(), rng);
        const auto taps = tap_params(pdp_, static_cast<double>(k), phases);
        return Sample{cqi_sequence(taps, snr_db, n, rng), k, snr_db};
    }

private:
    static LinkMapConfig validated(LinkMapConfig config) {
        config.validate();
        return config;
    }

    PowerDelayProfile pdp_;
    LinkMapConfig config_;
    std::vector<int> delays_;
    FrequencyKernel kernel_;
};

inline Sample generate_cqi_vector(const PowerDelayProfile& pdp, int k, double snr_db, int n,
                                  const LinkMapConfig& config, RandomStream& rng) {
    return CqiSampler(pdp, config).sample(k, snr_db, n, rng);
}

/// Substream of one (k, snr index, repetition) cell.
inline RandomStream cell_stream(std::uint64_t master_seed, int k, std::size_t snr_index, int rep) {
    return RandomStream(master_seed).substream(
        {0x6B66616374ULL, static_cast<std::uint64_t>(k), snr_index, static_cast<std::uint64_t>(rep)});
}

/// Samples in canonical (k, snr, rep) order. Cells are generated in parallel
/// on `threads` workers (0 = hardware concurrency); the output does not
/// depend on the worker count.
inline Dataset generate_dataset(const GenerationGrid& grid, const PowerDelayProfile& pdp,
                                const LinkMapConfig& config, std::uint64_t master_seed, unsigned threads = 0) {
    grid.validate();
    const CqiSampler sampler(pdp, config);
    const std::size_t snrs = grid.snr_db_values.size();
    const std::size_t reps = static_cast<std::size_t>(grid.reps);

    Dataset out;
    out.n = grid.n;
    out.samples.resize(grid.total());

    auto run_cell = [&](std::size_t idx) {
        const std::size_t ki = idx / (snrs * reps);
        const std::size_t si = (idx / reps) % snrs;
        const int rep = static_cast<int>(idx % reps);
        const int k = grid.k_values[ki];
        auto rng = cell_stream(master_seed, k, si, rep);
        out.samples[idx] = sampler.sample(k, grid.snr_db_values[si], grid.n, rng);
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, out.samples.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < out.samples.size(); ++i) run_cell(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    {
        std::vector<std::jthread> workers;
        for (unsigned w = 0; w < threads; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < out.samples.size(); i = next++) run_cell(i);
            });
        }
    }
    return out;
}

/// Uniformly permutes and splits: round(fraction * M) samples go to the first part.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction, RandomStream& rng) {
    detail::require(train_fraction > 0.0 && train_fraction < 1.0, "train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    const auto cut = static_cast<std::size_t>(std::round(train_fraction * static_cast<double>(dataset.size())));
    Dataset first{{}, dataset.n};
    Dataset second{{}, dataset.n};
    first.samples.reserve(cut);
    second.samples.reserve(dataset.size() - cut);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? first : second).samples.push_back(dataset.samples[order[i]]);
    }
    return {std::move(first), std::move(second)};
}

inline std::vector<double> one_hot(int k) {
    detail::require(k >= 0 && k < kNumClasses, "label must lie in [0, 10]");
    std::vector<double> v(kNumClasses, 0.0);
    v[static_cast<std::size_t>(k)] = 1.0;
    return v;
}

/// Fixed affine map [0, 15] -> [-1, 1].
inline std::vector<double> normalize_inputs(std::span<const int> cqi) {
    std::vector<double> x;
    x.reserve(cqi.size());
    for (int c : cqi) {
        detail::require(c >= 0 && c <= kMaxCqi, "CQI entries must lie in [0, 15]");
        x.push_back(static_cast<double>(c) / 7.5 - 1.0);
    }
    return x;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc{} && res.ptr == text.data() + text.size();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

/// Header `cqi_1,...,cqi_N,k_label,snr_db`, one sample per row, LF endings.
inline std::string to_csv(const Dataset& dataset) {
    std::string out;
    for (int i = 1; i <= dataset.n; ++i) out += "cqi_" + std::to_string(i) + ",";
    out += "k_label,snr_db\n";
    for (const auto& s : dataset.samples) {
        for (int c : s.cqi) {
            out += std::to_string(c);
            out += ',';
        }
        out += std::to_string(s.k_label);
        out += ',';
        out += detail::format_double(s.snr_db);
        out += '\n';
    }
    return out;
}

inline Dataset from_csv(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    detail::require(!lines.empty(), "dataset CSV: missing header");

    const auto header = detail::split_fields(lines.front());
    detail::require(header.size() >= 2 && header[header.size() - 2] == "k_label" && header.back() == "snr_db",
                    "dataset CSV: header must end with k_label,snr_db");
    Dataset dataset;
    dataset.n = static_cast<int>(header.size() - 2);
    for (int i = 0; i < dataset.n; ++i) {
        detail::require(header[static_cast<std::size_t>(i)] == "cqi_" + std::to_string(i + 1),
                        "dataset CSV: header column " + std::to_string(i + 1) + " must be cqi_" +
                            std::to_string(i + 1));
    }

    for (std::size_t row = 1; row < lines.size(); ++row) {
        if (lines[row].empty() && row + 1 == lines.size()) break;
        const std::string where = "dataset CSV line " + std::to_string(row + 1) + ": ";
        const auto fields = detail::split_fields(lines[row]);
        detail::require(fields.size() == header.size(), where + "expected " + std::to_string(header.size()) +
                                                            " columns, found " + std::to_string(fields.size()));
        Sample s;
        s.cqi.resize(static_cast<std::size_t>(dataset.n));
        for (std::size_t i = 0; i < s.cqi.size(); ++i) {
            detail::require(detail::parse_number(fields[i], s.cqi[i]) && s.cqi[i] >= 0 && s.cqi[i] <= kMaxCqi,
                            where + "CQI '" + std::string(fields[i]) + "' is not an integer in [0, 15]");
        }
        const auto label = fields[fields.size() - 2];
        detail::require(detail::parse_number(label, s.k_label) && s.k_label >= 0 && s.k_label < kNumClasses,
                        where + "k_label '" + std::string(label) + "' is not an integer in [0, 10]");
        detail::require(detail::parse_number(fields.back(), s.snr_db) && std::isfinite(s.snr_db),
                        where + "snr_db '" + std::string(fields.back()) + "' is not a finite number");
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

inline void save_csv(const Dataset& dataset, const std::string& path) { detail::write_file(path, to_csv(dataset)); }

inline Dataset load_csv(const std::string& path) { return from_csv(detail::read_file(path)); }

}  // namespace kfactor
