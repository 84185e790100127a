// Command-line front end for the few-shot relation extraction pipeline.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsare/augment.hpp"
#include "dsare/corpus.hpp"
#include "dsare/eval.hpp"
#include "dsare/fusion.hpp"
#include "dsare/prompts.hpp"
#include "dsare/rebackend.hpp"
#include "dsare/retrieval.hpp"
#include "dsare/runner.hpp"

using namespace dsare;
using nlohmann::json;

namespace {

struct LlmFlags {
    std::string transcript;
    std::string endpoint;
    std::string model;
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "DSARE_API_KEY";
    double temperature = 0.0;
    int max_tokens = 256;
    int retries = 2;
    int timeout_sec = 60;
    int backoff_ms = 250;
    int in_flight = 1;

    LlmSettings to_settings() const {
        LlmSettings s;
        s.transcript = transcript;
        s.http.base_url = endpoint;
        s.http.path = path;
        s.http.model = model;
        s.http.api_key_env = api_key_env;
        s.http.temperature = temperature;
        s.http.max_tokens = max_tokens;
        s.http.retries = retries;
        s.http.timeout_sec = timeout_sec;
        s.http.backoff_ms = backoff_ms;
        s.http.in_flight = in_flight;
        return s;
    }
};

void add_llm_flags(CLI::App* cmd, LlmFlags& flags) {
    cmd->add_option("--llm-transcript", flags.transcript,
                    "Scripted replay transcript (JSON); disables HTTP");
    cmd->add_option("--llm-endpoint", flags.endpoint,
                    "Chat-completions base URL, e.g. http://host:8080");
    cmd->add_option("--llm-model", flags.model, "Model identifier sent to the endpoint");
    cmd->add_option("--llm-path", flags.path, "Endpoint path");
    cmd->add_option("--api-key-env", flags.api_key_env,
                    "Environment variable holding the bearer token");
    cmd->add_option("--temperature", flags.temperature, "Sampling temperature (default 0)");
    cmd->add_option("--max-tokens", flags.max_tokens, "Max output tokens per call");
    cmd->add_option("--llm-retries", flags.retries, "Retries on transient HTTP failures");
    cmd->add_option("--llm-timeout", flags.timeout_sec, "Per-request timeout in seconds");
    cmd->add_option("--llm-backoff-ms", flags.backoff_ms, "Base retry backoff in milliseconds");
    cmd->add_option("--in-flight", flags.in_flight, "Max concurrent LLM requests");
}

void print_report(const EvalReport& report) {
    std::cout << "precision=" << report.precision << " recall=" << report.recall
              << " micro_f1=" << report.micro_f1 << " (" << report.n_correct_positive << "/"
              << report.n_pred_positive << " predicted, " << report.n_gold_positive
              << " gold positives, " << report.n_examples << " examples)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot relation extraction with a dual RE-model/LLM pipeline"};
    app.require_subcommand(1);

    // augment
    auto* aug_cmd = app.add_subcommand("augment", "Generate and validate LLM pseudo-samples");
    std::string aug_train, aug_schema, aug_out, aug_report_path;
    std::size_t aug_target = 8;
    int aug_retries = 2;
    LlmFlags aug_llm;
    aug_cmd->add_option("--train", aug_train, "K-shot training set (JSON records)")->required();
    aug_cmd->add_option("--schema", aug_schema, "Schema JSON file")->required();
    aug_cmd->add_option("--out", aug_out, "Merged output dataset path")->required();
    aug_cmd->add_option("--report", aug_report_path, "Augmentation report JSON path");
    aug_cmd->add_option("--k-target", aug_target, "Pseudo-samples per relation");
    aug_cmd->add_option("--retries", aug_retries, "Refill prompts per relation");
    add_llm_flags(aug_cmd, aug_llm);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the RE model");
    std::string tr_train, tr_dev, tr_schema, tr_model_out;
    ReModelConfig tr_cfg;
    train_cmd->add_option("--train", tr_train, "Training set")->required();
    train_cmd->add_option("--dev", tr_dev, "Dev set for epoch selection");
    train_cmd->add_option("--schema", tr_schema, "Schema JSON file")->required();
    train_cmd->add_option("--model-out", tr_model_out, "Model output path")->required();
    train_cmd->add_option("--hash-dim", tr_cfg.hash_dim, "Feature hashing buckets");
    train_cmd->add_option("--repr-dim", tr_cfg.repr_dim, "Per-entity representation size");
    train_cmd->add_option("--learning-rate", tr_cfg.learning_rate, "SGD learning rate");
    train_cmd->add_option("--epochs", tr_cfg.epochs, "Training epochs");
    train_cmd->add_option("--batch-size", tr_cfg.batch_size, "Mini-batch size");
    train_cmd->add_option("--l2", tr_cfg.l2, "L2 penalty");
    train_cmd->add_option("--seed", tr_cfg.seed, "Model seed");

    // build-datastore
    auto* ds_cmd = app.add_subcommand("build-datastore", "Encode examples into a KNN datastore");
    std::string ds_model, ds_examples, ds_schema, ds_out;
    ds_cmd->add_option("--model", ds_model, "Trained model file")->required();
    ds_cmd->add_option("--examples", ds_examples, "Examples to index")->required();
    ds_cmd->add_option("--schema", ds_schema, "Schema JSON file")->required();
    ds_cmd->add_option("--out", ds_out, "Datastore output path")->required();

    // predict
    auto* pred_cmd = app.add_subcommand("predict", "Predict relations for a test set");
    std::string pr_model, pr_store, pr_train, pr_test, pr_schema, pr_out, pr_mode = "full";
    std::string pr_sampling = "knn";
    std::size_t pr_k = 8, pr_m = 4;
    std::uint64_t pr_selector_seed = 1;
    bool pr_reverse = false;
    LlmFlags pr_llm;
    pred_cmd->add_option("--model", pr_model, "Trained model file")->required();
    pred_cmd->add_option("--datastore", pr_store, "Datastore file (KNN demonstrations)");
    pred_cmd->add_option("--train", pr_train, "Training set backing the datastore")->required();
    pred_cmd->add_option("--test", pr_test, "Test set")->required();
    pred_cmd->add_option("--schema", pr_schema, "Schema JSON file")->required();
    pred_cmd->add_option("--out", pr_out, "Predictions TSV output path")->required();
    pred_cmd->add_option("--mode", pr_mode, "full|pure_re|pure_llm|llm_aug_re|re_aug_llm");
    pred_cmd->add_option("--k", pr_k, "KNN demonstrations per query");
    pred_cmd->add_option("--m", pr_m, "Selector support examples per relation");
    pred_cmd->add_option("--selector-sampling", pr_sampling, "knn|random");
    pred_cmd->add_option("--selector-seed", pr_selector_seed, "Seed for random selector sampling");
    pred_cmd->add_flag("--reverse-demonstrations", pr_reverse, "Farthest-first demonstrations");
    add_llm_flags(pred_cmd, pr_llm);

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Score a predictions file");
    std::string ev_pred, ev_gold, ev_schema, ev_out;
    eval_cmd->add_option("--predictions", ev_pred, "Predictions TSV")->required();
    eval_cmd->add_option("--gold", ev_gold, "Gold test set")->required();
    eval_cmd->add_option("--schema", ev_schema, "Schema JSON file")->required();
    eval_cmd->add_option("--out", ev_out, "Report JSON output path");

    // run
    auto* run_cmd = app.add_subcommand("run", "Run the full pipeline from a config");
    std::string rn_config, rn_mode, rn_train, rn_dev, rn_test, rn_schema, rn_out_dir;
    std::int64_t rn_k_shot = -1, rn_k = -1, rn_m = -1;
    std::int64_t rn_sampling_seed = -1, rn_model_seed = -1;
    LlmFlags rn_llm;
    run_cmd->add_option("--config", rn_config, "Experiment config JSON (also accepts a manifest)");
    run_cmd->add_option("--mode", rn_mode, "full|pure_re|pure_llm|llm_aug_re|re_aug_llm|all");
    run_cmd->add_option("--train", rn_train, "Training pool");
    run_cmd->add_option("--dev", rn_dev, "Dev pool");
    run_cmd->add_option("--test", rn_test, "Test set");
    run_cmd->add_option("--schema", rn_schema, "Schema JSON file");
    run_cmd->add_option("--output-dir", rn_out_dir, "Output directory");
    run_cmd->add_option("--k-shot", rn_k_shot, "K instances per relation");
    run_cmd->add_option("--k", rn_k, "KNN demonstrations per query");
    run_cmd->add_option("--m", rn_m, "Selector support examples per relation");
    run_cmd->add_option("--sampling-seed", rn_sampling_seed, "K-shot sampling seed");
    run_cmd->add_option("--model-seed", rn_model_seed, "Model seed");
    add_llm_flags(run_cmd, rn_llm);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*aug_cmd) {
            const auto schema = RelationSchema::from_json_file(aug_schema);
            const auto train = load_dataset(aug_train, schema);
            auto client = make_client(aug_llm.to_settings());
            AugmentOptions opts{aug_target, aug_retries};
            auto [merged, report] = augment_training_set(train, schema, *client, opts);
            save_dataset(aug_out, merged);
            if (!aug_report_path.empty()) {
                std::ofstream out(aug_report_path);
                out << report.to_json().dump(2) << '\n';
            }
            std::cout << "accepted " << report.accepted << "/" << report.requested
                      << " pseudo-samples; merged size " << merged.size() << "\n";
        } else if (*train_cmd) {
            const auto schema = RelationSchema::from_json_file(tr_schema);
            const auto train = load_dataset(tr_train, schema);
            std::vector<RelationExample> dev;
            if (!tr_dev.empty()) dev = load_dataset(tr_dev, schema);
            const ReModel model = train_re_model(train, schema, tr_cfg, dev);
            save_re_model(model, tr_model_out);
            std::cout << "trained on " << train.size() << " examples; model written to "
                      << tr_model_out << "\n";
        } else if (*ds_cmd) {
            const auto schema = RelationSchema::from_json_file(ds_schema);
            const ReModel model = load_re_model(ds_model);
            const auto examples = load_dataset(ds_examples, schema);
            const Datastore store = build_datastore(model, examples);
            save_datastore(store, ds_out);
            std::cout << "datastore with " << store.entries.size() << " entries written to "
                      << ds_out << "\n";
        } else if (*pred_cmd) {
            const auto schema = RelationSchema::from_json_file(pr_schema);
            const ReModel model = load_re_model(pr_model);
            const auto train = load_dataset(pr_train, schema);
            const auto test = load_dataset(pr_test, schema);
            PredictOptions opts;
            opts.mode = parse_ablation_mode(pr_mode);
            opts.knn_k = pr_k;
            opts.selector.m = pr_m;
            opts.selector.sampling =
                pr_sampling == "random" ? SelectorSampling::random : SelectorSampling::knn;
            opts.selector.seed = pr_selector_seed;
            opts.reverse_demonstrations = pr_reverse;
            Datastore store;
            if (!pr_store.empty()) {
                store = load_datastore(pr_store);
            } else if (opts.mode != AblationMode::pure_llm) {
                store = build_datastore(model, train);
            }
            auto client = make_client(pr_llm.to_settings());
            std::vector<FusionOutcome> outcomes;
            outcomes.reserve(test.size());
            for (const auto& ex : test)
                outcomes.push_back(
                    predict_example(ex, model, store, train, *client, schema, opts));
            write_predictions_file(pr_out, test, outcomes);
            std::cout << "wrote " << outcomes.size() << " predictions to " << pr_out << "\n";
        } else if (*eval_cmd) {
            const auto schema = RelationSchema::from_json_file(ev_schema);
            const auto gold = load_dataset(ev_gold, schema);
            const auto predictions = read_predictions_file(ev_pred);
            const EvalReport report = micro_f1_score(predictions, gold, schema);
            if (!ev_out.empty()) {
                std::ofstream out(ev_out);
                out << report.to_json().dump(2) << '\n';
            }
            print_report(report);
        } else if (*run_cmd) {
            ExperimentConfig config;
            if (!rn_config.empty()) config = ExperimentConfig::from_file(rn_config);
            if (!rn_train.empty()) config.train_path = rn_train;
            if (!rn_dev.empty()) config.dev_path = rn_dev;
            if (!rn_test.empty()) config.test_path = rn_test;
            if (!rn_schema.empty()) config.schema_path = rn_schema;
            if (!rn_out_dir.empty()) config.output_dir = rn_out_dir;
            if (rn_k_shot >= 0) config.k_shot = static_cast<std::size_t>(rn_k_shot);
            if (rn_k >= 0) config.knn_k = static_cast<std::size_t>(rn_k);
            if (rn_m >= 0) config.selector_m = static_cast<std::size_t>(rn_m);
            if (rn_sampling_seed >= 0)
                config.sampling_seed = static_cast<std::uint64_t>(rn_sampling_seed);
            if (rn_model_seed >= 0) config.model_seed = static_cast<std::uint64_t>(rn_model_seed);
            if (!rn_llm.transcript.empty()) {
                config.llm.transcript = rn_llm.transcript;
            } else if (!rn_llm.endpoint.empty()) {
                config.llm = rn_llm.to_settings();
            }
            if (rn_mode == "all") {
                const auto reports = run_ablation_grid(config);
                for (const auto& [name, report] : reports) {
                    std::cout << name << ": ";
                    print_report(report);
                }
            } else {
                if (!rn_mode.empty()) config.mode = parse_ablation_mode(rn_mode);
                const ExperimentResult result = run_experiment(config);
                std::cout << to_string(config.mode) << ": ";
                print_report(result.report);
                std::cout << "predictions: " << result.predictions_path.string() << "\n";
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
