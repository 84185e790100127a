#include "dsare/runner.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "dsare/prompts.hpp"
#include "dsare/util.hpp"

namespace dsare {

using nlohmann::json;

bool augmentation_enabled(AblationMode mode) {
    switch (mode) {
        case AblationMode::full:
        case AblationMode::llm_aug_re:
        case AblationMode::re_aug_llm: return true;
        case AblationMode::pure_re:
        case AblationMode::pure_llm: return false;
    }
    return false;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.train_path = j.value("train", "");
    c.dev_path = j.value("dev", "");
    c.test_path = j.value("test", "");
    c.schema_path = j.value("schema", "");
    c.output_dir = j.value("output_dir", "out");
    c.k_shot = j.value("k_shot", c.k_shot);
    c.sampling_seed = j.value("sampling_seed", c.sampling_seed);
    c.model_seed = j.value("model_seed", c.model_seed);
    c.knn_k = j.value("knn_k", c.knn_k);
    c.selector_m = j.value("selector_m", c.selector_m);
    c.mode = parse_ablation_mode(j.value("mode", "full"));
    c.augment_target = j.value("augment_target", c.augment_target);
    c.augment_retries = j.value("augment_retries", c.augment_retries);
    c.datastore_include_augmented =
        j.value("datastore_include_augmented", c.datastore_include_augmented);
    c.reverse_demonstrations = j.value("reverse_demonstrations", c.reverse_demonstrations);
    const std::string sampling = j.value("selector_sampling", "knn");
    if (sampling == "knn") {
        c.selector_sampling = SelectorSampling::knn;
    } else if (sampling == "random") {
        c.selector_sampling = SelectorSampling::random;
    } else {
        throw std::invalid_argument("unknown selector_sampling '" + sampling + "'");
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        c.model.hash_dim = m.value("hash_dim", c.model.hash_dim);
        c.model.repr_dim = m.value("repr_dim", c.model.repr_dim);
        c.model.learning_rate = m.value("learning_rate", c.model.learning_rate);
        c.model.epochs = m.value("epochs", c.model.epochs);
        c.model.batch_size = m.value("batch_size", c.model.batch_size);
        c.model.l2 = m.value("l2", c.model.l2);
    }
    if (j.contains("llm")) {
        const json& l = j["llm"];
        c.llm.transcript = l.value("transcript", "");
        c.llm.http.base_url = l.value("endpoint", "");
        c.llm.http.path = l.value("path", c.llm.http.path);
        c.llm.http.model = l.value("model", "");
        c.llm.http.api_key_env = l.value("api_key_env", c.llm.http.api_key_env);
        c.llm.http.temperature = l.value("temperature", c.llm.http.temperature);
        c.llm.http.max_tokens = l.value("max_tokens", c.llm.http.max_tokens);
        c.llm.http.retries = l.value("retries", c.llm.http.retries);
        c.llm.http.timeout_sec = l.value("timeout_sec", c.llm.http.timeout_sec);
        c.llm.http.backoff_ms = l.value("backoff_ms", c.llm.http.backoff_ms);
        c.llm.http.in_flight = l.value("in_flight", c.llm.http.in_flight);
    }
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path.string());
    return from_json(json::parse(in));
}

json ExperimentConfig::to_json() const {
    return json{{"train", train_path.string()},
                {"dev", dev_path.string()},
                {"test", test_path.string()},
                {"schema", schema_path.string()},
                {"output_dir", output_dir.string()},
                {"k_shot", k_shot},
                {"sampling_seed", sampling_seed},
                {"model_seed", model_seed},
                {"knn_k", knn_k},
                {"selector_m", selector_m},
                {"mode", to_string(mode)},
                {"augment_target", augment_target},
                {"augment_retries", augment_retries},
                {"datastore_include_augmented", datastore_include_augmented},
                {"reverse_demonstrations", reverse_demonstrations},
                {"selector_sampling",
                 selector_sampling == SelectorSampling::knn ? "knn" : "random"},
                {"model",
                 {{"hash_dim", model.hash_dim},
                  {"repr_dim", model.repr_dim},
                  {"learning_rate", model.learning_rate},
                  {"epochs", model.epochs},
                  {"batch_size", model.batch_size},
                  {"l2", model.l2}}},
                {"llm",
                 {{"transcript", llm.transcript},
                  {"endpoint", llm.http.base_url},
                  {"path", llm.http.path},
                  {"model", llm.http.model},
                  {"api_key_env", llm.http.api_key_env},
                  {"temperature", llm.http.temperature},
                  {"max_tokens", llm.http.max_tokens},
                  {"retries", llm.http.retries},
                  {"timeout_sec", llm.http.timeout_sec},
                  {"backoff_ms", llm.http.backoff_ms},
                  {"in_flight", llm.http.in_flight}}}};
}

std::unique_ptr<LlmClient> make_client(const LlmSettings& settings) {
    if (settings.scripted()) return ScriptedClient::from_file(settings.transcript);
    if (settings.http.base_url.empty())
        throw std::invalid_argument("LLM settings need a transcript file or an endpoint URL");
    return std::make_unique<HttpClient>(settings.http);
}

void write_predictions_file(const std::filesystem::path& path,
                            const std::vector<RelationExample>& test,
                            const std::vector<FusionOutcome>& outcomes) {
    if (test.size() != outcomes.size())
        throw std::invalid_argument("predictions/test size mismatch");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write predictions file: " + path.string());
    out << "example_id\tp_re\tp_llm\tfinal\tsource\n";
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& o = outcomes[i];
        out << test[i].id << '\t' << o.p_re << '\t' << o.p_llm << '\t' << o.final_relation << '\t'
            << to_string(o.source) << '\n';
    }
}

std::vector<std::pair<std::string, std::string>> read_predictions_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open predictions file: " + path.string());
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (first) {
            first = false;
            if (!cols.empty() && cols[0] == "example_id") continue;
        }
        if (cols.size() != 5)
            throw std::runtime_error("malformed predictions line: " + line);
        out.emplace_back(cols[0], cols[3]);
    }
    return out;
}

namespace {

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
    try {
        return fn();
    } catch (const TransportError&) {
        throw;  // keep status + query context intact
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage ") + stage + ": " + e.what());
    }
}

// Index-parallel map keeping input order; sequential when workers <= 1.
void for_each_index(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    const int count = std::min<int>(workers, static_cast<int>(std::thread::hardware_concurrency()));
    for (int t = 0; t < std::max(1, count); ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);

    const RelationSchema schema = run_stage(
        "load", [&] { return RelationSchema::from_json_file(config.schema_path); });
    const auto train_pool =
        run_stage("load", [&] { return load_dataset(config.train_path, schema); });
    const auto test = run_stage("load", [&] { return load_dataset(config.test_path, schema); });
    std::vector<RelationExample> dev_pool;
    if (!config.dev_path.empty())
        dev_pool = run_stage("load", [&] { return load_dataset(config.dev_path, schema); });

    const auto gold_train = run_stage("sample", [&] {
        return sample_k_shot(train_pool, {config.k_shot, config.sampling_seed}, schema);
    });
    std::vector<RelationExample> dev;
    if (!dev_pool.empty()) {
        dev = run_stage("sample", [&] {
            return sample_k_shot(
                dev_pool, {config.k_shot, derive_seed(config.sampling_seed, "dev")}, schema);
        });
    }

    auto client = make_client(config.llm);

    std::vector<RelationExample> train_set = gold_train;
    if (augmentation_enabled(config.mode)) {
        AugmentOptions opts;
        opts.k_target_per_relation =
            config.augment_target ? config.augment_target : config.k_shot;
        opts.refill_retries = config.augment_retries;
        auto [merged, aug_report] = run_stage(
            "augment", [&] { return augment_training_set(gold_train, schema, *client, opts); });
        train_set = std::move(merged);
        run_stage("write", [&] {
            save_dataset(config.output_dir / "augmented_train.jsonl", train_set);
            std::ofstream out(config.output_dir / "augment_report.json");
            out << aug_report.to_json().dump(2) << '\n';
            return 0;
        });
    }

    ReModelConfig model_cfg = config.model;
    model_cfg.seed = config.model_seed;
    const ReModel model =
        run_stage("train", [&] { return train_re_model(train_set, schema, model_cfg, dev); });

    const auto& datastore_examples =
        config.datastore_include_augmented ? train_set : gold_train;
    const Datastore store =
        run_stage("datastore", [&] { return build_datastore(model, datastore_examples); });

    PredictOptions popts;
    popts.mode = config.mode;
    popts.knn_k = config.knn_k;
    popts.selector.m = config.selector_m;
    popts.selector.sampling = config.selector_sampling;
    popts.selector.seed = config.sampling_seed;
    popts.reverse_demonstrations = config.reverse_demonstrations;

    std::vector<FusionOutcome> outcomes(test.size());
    run_stage("predict", [&] {
        for_each_index(test.size(), config.llm.http.in_flight, [&](std::size_t i) {
            outcomes[i] = predict_example(test[i], model, store, datastore_examples, *client,
                                          schema, popts);
        });
        return 0;
    });

    std::vector<std::pair<std::string, std::string>> predictions;
    predictions.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        predictions.emplace_back(test[i].id, outcomes[i].final_relation);
    const EvalReport report =
        run_stage("evaluate", [&] { return micro_f1_score(predictions, test, schema); });

    ExperimentResult result;
    result.report = report;
    result.outcomes = std::move(outcomes);
    result.predictions_path = config.output_dir / "predictions.tsv";
    result.report_path = config.output_dir / "report.json";
    result.manifest_path = config.output_dir / "manifest.json";

    run_stage("write", [&] {
        write_predictions_file(result.predictions_path, test, result.outcomes);
        json report_json = report.to_json();
        report_json["mode"] = to_string(config.mode);
        report_json["scoring"] = "micro-F1 excluding the no-relation label from positives";
        std::ofstream rep(result.report_path);
        rep << report_json.dump(2) << '\n';

        json manifest = config.to_json();
        manifest["prompt_template_version"] = kPromptTemplateVersion;
        manifest["dev_sampling_seed"] = derive_seed(config.sampling_seed, "dev");
        manifest["n_train_gold"] = gold_train.size();
        manifest["n_train_final"] = train_set.size();
        manifest["n_test"] = test.size();
        std::ofstream man(result.manifest_path);
        man << manifest.dump(2) << '\n';
        return 0;
    });
    return result;
}

std::map<std::string, EvalReport> run_ablation_grid(const ExperimentConfig& config) {
    static const AblationMode modes[] = {AblationMode::pure_re, AblationMode::pure_llm,
                                         AblationMode::llm_aug_re, AblationMode::re_aug_llm,
                                         AblationMode::full};
    std::map<std::string, EvalReport> reports;
    for (AblationMode mode : modes) {
        ExperimentConfig sub = config;
        sub.mode = mode;
        sub.output_dir = config.output_dir / to_string(mode);
        reports.emplace(to_string(mode), run_experiment(sub).report);
    }
    json summary;
    for (const auto& [name, report] : reports) summary[name] = report.to_json();
    std::filesystem::create_directories(config.output_dir);
    std::ofstream out(config.output_dir / "summary.json");
    out << summary.dump(2) << '\n';
    return reports;
}

}  // namespace dsare
