#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsare/augment.hpp"
#include "dsare/corpus.hpp"
#include "dsare/eval.hpp"
#include "dsare/fusion.hpp"
#include "dsare/llm_client.hpp"
#include "dsare/rebackend.hpp"
#include "dsare/retrieval.hpp"

namespace dsare {

struct LlmSettings {
    std::string transcript;  // scripted replay file; takes precedence over HTTP
    HttpClientConfig http;

    bool scripted() const { return !transcript.empty(); }
};

struct ExperimentConfig {
    std::filesystem::path train_path;
    std::filesystem::path dev_path;  // optional; empty disables dev epoch selection
    std::filesystem::path test_path;
    std::filesystem::path schema_path;
    std::filesystem::path output_dir = "out";

    std::size_t k_shot = 8;
    std::uint64_t sampling_seed = 1;
    std::uint64_t model_seed = 1;
    std::size_t knn_k = 8;
    std::size_t selector_m = 4;
    AblationMode mode = AblationMode::full;

    std::size_t augment_target = 0;  // pseudo-samples per relation; 0 means k_shot
    int augment_retries = 2;
    bool datastore_include_augmented = false;
    bool reverse_demonstrations = false;
    SelectorSampling selector_sampling = SelectorSampling::knn;

    ReModelConfig model;  // model.seed is overridden by model_seed
    LlmSettings llm;

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Training-set augmentation is part of every mode that still contains the
// trained-with-pseudo-data RE model; the two "pure" ablations drop it.
bool augmentation_enabled(AblationMode mode);

std::unique_ptr<LlmClient> make_client(const LlmSettings& settings);

struct ExperimentResult {
    EvalReport report;
    std::vector<FusionOutcome> outcomes;  // test input order
    std::filesystem::path predictions_path;
    std::filesystem::path report_path;
    std::filesystem::path manifest_path;
};

// K-shot sampling -> optional augmentation -> training -> datastore ->
// per-example prediction over the whole test set -> micro-F1. Writes
// predictions.tsv, report.json and manifest.json (plus the augmented set and
// its report when augmentation ran) under output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

// All five ablation modes from one config, each in its own subdirectory,
// plus a summary.json keyed by mode.
std::map<std::string, EvalReport> run_ablation_grid(const ExperimentConfig& config);

void write_predictions_file(const std::filesystem::path& path,
                            const std::vector<RelationExample>& test,
                            const std::vector<FusionOutcome>& outcomes);

// (example_id, final label) pairs from a predictions.tsv.
std::vector<std::pair<std::string, std::string>> read_predictions_file(
    const std::filesystem::path& path);

}  // namespace dsare
