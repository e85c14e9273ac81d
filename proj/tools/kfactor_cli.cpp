// kfactor: generate CQI datasets, train K-factor classifiers, evaluate them.
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "kfactor/kfactor.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

kfactor::PipelineConfig config_or_default(const std::string& path) {
    return path.empty() ? kfactor::PipelineConfig{} : kfactor::load_config(path);
}

void print_confusion(const kfactor::ConfusionMatrix& cm) {
    std::cout << "true\\pred";
    for (int j = 0; j < kfactor::kNumClasses; ++j) std::printf("%6d", j);
    std::printf("\n");
    for (int i = 0; i < kfactor::kNumClasses; ++i) {
        std::printf("%9d", i);
        for (int j = 0; j < kfactor::kNumClasses; ++j) std::printf("%6lld", static_cast<long long>(cm.count(i, j)));
        std::printf("\n");
    }
    std::printf("correct %.2f%%  wrong %.2f%%\n", 100.0 * cm.accuracy(), 100.0 * (1.0 - cm.accuracy()));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ricean K-factor estimation from CQI sequences"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<int> n;
    std::optional<std::uint64_t> seed;
    std::string out_path, train_out, test_out;
    auto* generate = app.add_subcommand("generate", "Generate a labeled CQI dataset over the (K, SNR) grid");
    generate->add_option("--config", config_path, "Pipeline config (JSON)");
    generate->add_option("--n", n, "CQI vector length (overrides config 'n')");
    generate->add_option("--seed", seed, "Master seed (overrides config 'master_seed')");
    generate->add_option("--out", out_path, "Output dataset CSV")->required();
    generate->add_option("--train-out", train_out, "Also write the training share of the split");
    generate->add_option("--test-out", test_out, "Also write the test share of the split");

    std::string data_path, model_out, history_out, init_name;
    auto* train = app.add_subcommand("train", "Train a classifier on a dataset CSV");
    train->add_option("--config", config_path, "Pipeline config (JSON)");
    train->add_option("--data", data_path, "Training dataset CSV")->required();
    train->add_option("--init", init_name, "Initialization: random or autoencoder");
    train->add_option("--model-out", model_out, "Output model file")->required();
    train->add_option("--history-out", history_out, "Training history CSV");

    std::string model_path, report_out;
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a model and write its confusion matrix");
    evaluate->add_option("--model", model_path, "Model file")->required();
    evaluate->add_option("--data", data_path, "Test dataset CSV")->required();
    evaluate->add_option("--report-out", report_out, "Confusion matrix CSV")->required();

    std::string output_dir;
    auto* pipeline = app.add_subcommand("pipeline", "Run the full generate/train/evaluate experiment");
    pipeline->add_option("--config", config_path, "Pipeline config (JSON)")->required();
    pipeline->add_option("--output-dir", output_dir, "Output directory (overrides config 'output_dir')");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*generate) {
            auto config = config_or_default(config_path);
            if (n) config.grid.n = *n;
            if (seed) config.master_seed = *seed;
            config.grid.validate();
            const auto dataset = kfactor::generate_for(config, config.grid.n);
            kfactor::save_csv(dataset, out_path);
            if (!train_out.empty() || !test_out.empty()) {
                auto rng = kfactor::split_stream(config.master_seed, dataset.n);
                const auto [train_set, test_set] = kfactor::split(dataset, config.train_fraction, rng);
                if (!train_out.empty()) kfactor::save_csv(train_set, train_out);
                if (!test_out.empty()) kfactor::save_csv(test_set, test_out);
            }
            std::cout << "wrote " << dataset.size() << " samples of length " << dataset.n << " to " << out_path
                      << "\n";
        } else if (*train) {
            auto config = config_or_default(config_path);
            if (!init_name.empty()) config.train.init_mode = kfactor::parse_init_mode(init_name);
            const auto dataset = kfactor::load_csv(data_path);
            const auto result = kfactor::train(dataset, config.train);
            kfactor::save_model(result.params, model_out);
            if (!history_out.empty()) {
                kfactor::detail::write_file(history_out, kfactor::history_to_csv(result.history));
            }
            std::cout << "trained " << kfactor::to_string(config.train.init_mode) << " model: "
                      << result.history.iterations << " iterations, stop reason "
                      << kfactor::to_string(result.history.stop_reason) << "\n";
        } else if (*evaluate) {
            const auto model = kfactor::load_model(model_path);
            const auto dataset = kfactor::load_csv(data_path);
            const auto cm = kfactor::confusion(model, dataset);
            kfactor::detail::write_file(report_out, kfactor::confusion_to_csv(cm));
            print_confusion(cm);
        } else if (*pipeline) {
            auto config = kfactor::load_config(config_path);
            if (!output_dir.empty()) config.output_dir = output_dir;
            const auto runs = kfactor::run_pipeline(config);
            std::cout << kfactor::summary_to_text(runs);
        }
    } catch (const kfactor::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const kfactor::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    }
    return 0;
}
