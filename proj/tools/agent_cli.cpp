// Pipeline driver: `agent <stage> [options]`, one stage per invocation.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agent/error.hpp"
#include "agent/pipeline.hpp"

namespace {

using agent::ExitCode;
using agent::pipeline::DatasetKind;
using agent::pipeline::PipelineConfig;

int exit_code(ExitCode c) { return static_cast<int>(c); }

std::string stage_list() {
    std::string out;
    for (const auto& [stage, name] : agent::pipeline::kStageNames) {
        if (!out.empty()) out += ", ";
        out += name;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unanswerable-question generation pipeline"};
    app.set_config("--config", "", "key=value config file; command-line flags take precedence");

    PipelineConfig cfg;
    std::string stage_name;
    std::string kind = "squad";
    std::vector<std::string> predictions;
    std::vector<std::string> annotations;
    std::string workdir = ".";
    std::string input, dataset, output;

    app.add_option("stage", stage_name, "Stage to run: " + stage_list())->required();
    app.add_option("--workdir", workdir, "Directory holding pipeline artifacts")->capture_default_str();
    app.add_option("--kind", kind, "Dataset kind")->check(CLI::IsMember({"squad", "hotpot"}))->capture_default_str();
    app.add_option("--input", input, "Source dataset for ingest");
    app.add_option("--dataset", dataset, "SQuAD-format dataset for evaluate/attack");
    app.add_option("--output", output, "Output path override for emit/evaluate/attack");
    app.add_option("--predictions", predictions, "Prediction files (one per model)");
    app.add_option("--annotations", annotations, "Annotation files (JSON-lines or CSV)");
    app.add_option("--seed", cfg.seed, "Top-level seed")->capture_default_str();
    app.add_option("--k", cfg.k, "Contexts retrieved per question")->capture_default_str();
    app.add_option("--ratio", cfg.ratio, "Unanswerable:answerable ratio for adversarial training")->capture_default_str();
    app.add_option("--min-votes", cfg.min_votes, "Answering models needed to mark a candidate challenging")
        ->capture_default_str();
    app.add_option("--grid-step", cfg.grid_step, "Grid step for alpha/beta search")->capture_default_str();
    app.add_option("--grid-hi", cfg.grid_hi, "Upper end of the alpha/beta range")->capture_default_str();
    app.add_option("--per-level", cfg.per_level, "Annotation draws per difficulty level")->capture_default_str();
    app.add_option("--level-lo", cfg.level_lo, "Lowest difficulty level sampled")->capture_default_str();
    app.add_option("--level-hi", cfg.level_hi, "Highest difficulty level sampled")->capture_default_str();
    app.add_option("--spikes", cfg.spikes, "Answerable questions spiked into the annotation batch")
        ->capture_default_str();
    app.add_option("--num-attack", cfg.num_attack, "Tokens perturbed per question")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_code(ExitCode::Validation);
    }

    const auto stage = agent::pipeline::stage_from_string(stage_name);
    if (!stage) {
        std::cerr << "error: unknown stage '" << stage_name << "'; expected one of: " << stage_list() << "\n";
        return exit_code(ExitCode::Validation);
    }
    cfg.kind = kind == "hotpot" ? DatasetKind::Hotpot : DatasetKind::Squad;
    cfg.workdir = workdir;
    cfg.input = input;
    cfg.dataset = dataset;
    cfg.output = output;
    cfg.predictions.assign(predictions.begin(), predictions.end());
    cfg.annotations.assign(annotations.begin(), annotations.end());

    try {
        const auto result = agent::pipeline::run_stage(*stage, cfg);
        std::cout << stage_name << ": " << result.message << "\n";
        return exit_code(ExitCode::Success);
    } catch (const agent::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: malformed artifact: " << e.what() << "\n";
        return exit_code(ExitCode::DataIntegrity);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(ExitCode::Failure);
    }
}
