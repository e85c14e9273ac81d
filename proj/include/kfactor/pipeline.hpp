#pragma once

// Pipeline configuration (JSON) and the generate -> split -> train ->
// evaluate experiment driver.

#include <json.hpp>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "kfactor/channel.hpp"
#include "kfactor/dataset.hpp"
#include "kfactor/error.hpp"
#include "kfactor/evaluation.hpp"
#include "kfactor/link_quality.hpp"
#include "kfactor/training.hpp"

namespace kfactor {

struct PipelineConfig {
    std::vector<double> delays_us = pedestrian_b_delays_us();
    std::vector<double> gains_db = pedestrian_b_gains_db();
    LinkMapConfig link;
    GenerationGrid grid;
    TrainConfig train;
    std::vector<int> n_values{100, 300, 500};
    std::vector<InitMode> init_modes{InitMode::random, InitMode::autoencoder};
    std::uint64_t master_seed = 1;
    double train_fraction = 0.8;
    std::string output_dir = "kfactor_out";

    [[nodiscard]] PowerDelayProfile profile() const { return normalize_pdp(delays_us, gains_db); }

    void validate() const {
        profile();
        link.validate();
        grid.validate();
        train.validate();
        delay_samples(profile(), link.sample_rate_hz);
        detail::require(!n_values.empty(), "n_values must not be empty");
        for (int n : n_values) detail::require(n >= 1, "n_values entries must be at least 1");
        detail::require(!init_modes.empty(), "init_modes must not be empty");
        detail::require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
    }
};

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

template <typename Fn>
void with_field_context(const char* key, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace detail

/// Keys not present keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
    detail::require(j.is_object(), "config must be a JSON object");
    static const std::set<std::string> known{
        "delays_us",       "gains_db",          "fft_size",
        "sample_rate_hz",  "used_subcarriers",  "beta",
        "cqi_thresholds_db", "k_values",        "snr_db_values",
        "reps",            "n",                 "n_values",
        "max_epochs",      "min_gradient_norm", "max_validation_failures",
        "validation_fraction", "init_mode",     "init_modes",
        "seed",            "hidden_units",      "activation",
        "master_seed",     "train_fraction",    "output_dir"};
    for (const auto& item : j.items()) {
        detail::require(known.count(item.key()) > 0, "unknown config field '" + item.key() + "'");
    }

    PipelineConfig c;
    using detail::read_field;
    read_field(j, "delays_us", c.delays_us);
    read_field(j, "gains_db", c.gains_db);
    read_field(j, "fft_size", c.link.fft_size);
    read_field(j, "sample_rate_hz", c.link.sample_rate_hz);
    if (j.contains("used_subcarriers")) {
        read_field(j, "used_subcarriers", c.link.used_subcarriers);
    } else if (j.contains("fft_size")) {
        detail::with_field_context("fft_size",
                                   [&] { c.link.used_subcarriers = centered_subcarriers(c.link.fft_size, 600); });
    }
    read_field(j, "beta", c.link.beta);
    read_field(j, "cqi_thresholds_db", c.link.cqi_thresholds_db);
    read_field(j, "k_values", c.grid.k_values);
    read_field(j, "snr_db_values", c.grid.snr_db_values);
    read_field(j, "reps", c.grid.reps);
    read_field(j, "n", c.grid.n);
    read_field(j, "n_values", c.n_values);
    read_field(j, "max_epochs", c.train.max_epochs);
    read_field(j, "min_gradient_norm", c.train.min_gradient_norm);
    read_field(j, "max_validation_failures", c.train.max_validation_failures);
    read_field(j, "validation_fraction", c.train.validation_fraction);
    read_field(j, "seed", c.train.seed);
    read_field(j, "hidden_units", c.train.hidden_units);
    read_field(j, "master_seed", c.master_seed);
    read_field(j, "train_fraction", c.train_fraction);
    read_field(j, "output_dir", c.output_dir);

    std::string name;
    if (j.contains("init_mode")) {
        read_field(j, "init_mode", name);
        detail::with_field_context("init_mode", [&] { c.train.init_mode = parse_init_mode(name); });
    }
    if (j.contains("activation")) {
        read_field(j, "activation", name);
        detail::with_field_context("activation", [&] { c.train.activation = parse_activation(name); });
    }
    if (j.contains("init_modes")) {
        std::vector<std::string> names;
        read_field(j, "init_modes", names);
        c.init_modes.clear();
        detail::with_field_context("init_modes", [&] {
            for (const auto& n : names) c.init_modes.push_back(parse_init_mode(n));
        });
    }

    detail::with_field_context("delays_us/gains_db", [&] { c.profile(); });
    detail::with_field_context("link", [&] { c.link.validate(); });
    detail::with_field_context("grid", [&] { c.grid.validate(); });
    detail::with_field_context("train", [&] { c.train.validate(); });
    c.validate();
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    const std::string text = detail::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

struct RunSummary {
    int n = 0;
    InitMode init = InitMode::random;
    std::size_t test_samples = 0;
    double accuracy = 0.0;
    StopReason stop_reason = StopReason::none;
};

struct ExperimentOutcome {
    RunSummary summary;
    TrainingResult training;
    ConfusionMatrix confusion;
};

/// Substream seeding the 80/20 split of one N.
inline RandomStream split_stream(std::uint64_t master_seed, int n) {
    return RandomStream(master_seed).substream({0x73706C6974ULL, static_cast<std::uint64_t>(n)});
}

inline Dataset generate_for(const PipelineConfig& config, int n) {
    GenerationGrid grid = config.grid;
    grid.n = n;
    return generate_dataset(grid, config.profile(), config.link, config.master_seed);
}

/// Splits `dataset`, trains with `init` and evaluates on the held-out part.
inline ExperimentOutcome run_experiment(const PipelineConfig& config, const Dataset& dataset, InitMode init) {
    auto rng = split_stream(config.master_seed, dataset.n);
    const auto [train_set, test_set] = split(dataset, config.train_fraction, rng);
    TrainConfig tc = config.train;
    tc.init_mode = init;
    ExperimentOutcome out;
    out.training = train(train_set, tc);
    out.confusion = confusion(out.training.params, test_set);
    out.summary = {dataset.n, init, test_set.size(), out.confusion.accuracy(), out.training.history.stop_reason};
    return out;
}

inline std::string summary_to_text(const std::vector<RunSummary>& runs) {
    std::string out = "n,init,test_samples,accuracy,correct_rate,wrong_rate,stop_reason\n";
    for (const auto& r : runs) {
        out += std::to_string(r.n) + "," + std::string(to_string(r.init)) + "," + std::to_string(r.test_samples) +
               "," + detail::format_double(r.accuracy) + "," + detail::format_double(r.accuracy) + "," +
               detail::format_double(1.0 - r.accuracy) + "," + std::string(to_string(r.stop_reason)) + "\n";
    }
    return out;
}

/// For every N: generate, then for every init mode split/train/evaluate.
/// Writes dataset, model, history, confusion and summary files into
/// config.output_dir and returns the per-run summaries.
inline std::vector<RunSummary> run_pipeline(const PipelineConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    const fs::path dir(config.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + config.output_dir + "': " + ec.message());

    std::vector<RunSummary> runs;
    for (int n : config.n_values) {
        const Dataset dataset = generate_for(config, n);
        const std::string tag = "n" + std::to_string(n);
        save_csv(dataset, (dir / ("dataset_" + tag + ".csv")).string());
        for (InitMode init : config.init_modes) {
            const auto outcome = run_experiment(config, dataset, init);
            const std::string run = tag + "_" + std::string(to_string(init));
            save_model(outcome.training.params, (dir / ("model_" + run + ".txt")).string());
            detail::write_file((dir / ("history_" + run + ".csv")).string(), history_to_csv(outcome.training.history));
            detail::write_file((dir / ("confusion_" + run + ".csv")).string(), confusion_to_csv(outcome.confusion));
            runs.push_back(outcome.summary);
        }
    }
    detail::write_file((dir / "summary.txt").string(), summary_to_text(runs));
    return runs;
}

}  // namespace kfactor
