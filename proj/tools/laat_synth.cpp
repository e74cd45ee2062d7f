// Writes a planted-logistic dataset, its schema, the oracle importance
// scores and replay fixtures that simulate a chat model scoring the schema.
// Everything the `laat` pipeline needs to run offline.

#include "laat/cli.hpp"
#include "laat/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic LAAT task with offline replay fixtures", "laat_synth"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    laat::SyntheticConfig cfg;
    std::string out_dir = "synthetic";
    std::size_t estimates = 5;
    double jitter = 1.0;
    laat::ProviderConfig pc;
    app.add_option("--out-dir", out_dir, "output directory")->capture_default_str();
    app.add_option("--rows", cfg.rows, "rows to draw")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--features", cfg.features, "numeric features")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--signal", cfg.signal, "logit scale")->capture_default_str();
    app.add_option("--seed", cfg.seed, "data seed")->capture_default_str();
    app.add_flag("--spurious-group", cfg.spurious_group, "add a label-independent categorical feature and bias rules");
    app.add_option("--estimates", estimates, "simulated score generations")->capture_default_str()->check(
        CLI::PositiveNumber);
    app.add_option("--jitter", jitter, "std of the simulated per-sample score noise")->capture_default_str();
    app.add_option("--llm", pc.model, "chat model name the fixtures answer for")->capture_default_str();
    app.add_option("--temperature", pc.temperature, "generation temperature the fixtures answer for")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        const std::filesystem::path dir(out_dir);
        const auto task = laat::cli::write_synthetic(dir, cfg, pc, estimates, jitter);
        fmt::print("wrote {} rows, {} features to {}\n", task.table.size(), task.task.features.size(), dir.string());
    } catch (const std::exception& e) {
        fmt::print(std::cerr, "laat_synth: error: {}\n", e.what());
        return 1;
    }
    return 0;
}
