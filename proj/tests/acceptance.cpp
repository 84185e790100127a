// Acceptance suite: one check per release criterion, one pass/fail line each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>

#include "json.hpp"

#include "dsare/augment.hpp"
#include "dsare/corpus.hpp"
#include "dsare/eval.hpp"
#include "dsare/fusion.hpp"
#include "dsare/prompts.hpp"
#include "dsare/rebackend.hpp"
#include "dsare/retrieval.hpp"
#include "dsare/runner.hpp"
#include "dsare/util.hpp"
#include "test_support.hpp"

using namespace dsare;
using namespace dsare::testing;
using nlohmann::json;

namespace {

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

// ---- 1. KNN oracle equivalence -------------------------------------------

std::vector<Neighbor> brute_force_knn(const Datastore& store, const std::vector<double>& q,
                                      std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < store.entries.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < store.dim; ++j) {
            const double diff = store.entries[i].repr[j] - q[j];
            d2 += diff * diff;
        }
        all.emplace_back(d2, i);
    }
    std::sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return store.entries[a.second].example_id < store.entries[b.second].example_id;
    });
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) {
        const auto& e = store.entries[all[i].second];
        out.push_back({e.example_id, e.relation, std::sqrt(all[i].first)});
    }
    return out;
}

Check check_knn_oracle() {
    Check c;
    std::mt19937_64 rng(4242);
    auto coord = [&] { return static_cast<double>(uniform_below(rng, 7)) - 3.0; };
    const std::size_t dim = 16;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 64);
        Datastore store;
        store.dim = dim;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> v(dim);
            for (auto& x : v) x = coord();
            store.entries.push_back({std::move(v), "r", "id" + std::to_string(i)});
        }
        std::vector<double> q(dim);
        for (auto& x : q) x = coord();
        const std::size_t k = 1 + uniform_below(rng, 8);

        const auto got = knn_query(store, {q, "query"}, k);
        const auto want = brute_force_knn(store, q, k);
        c.require(got.size() == want.size(), "neighbor count mismatch");
        for (std::size_t i = 0; i < got.size() && c.ok; ++i) {
            c.require(got[i].example_id == want[i].example_id,
                      "neighbor order mismatch at trial " + std::to_string(trial));
            c.require(got[i].distance == want[i].distance, "neighbor distance mismatch");
            if (i) c.require(got[i - 1].distance <= got[i].distance, "distances not monotone");
        }
        if (!c.ok) break;
    }
    return c;
}

// ---- 2. Gradient check ----------------------------------------------------

Check check_gradient() {
    Check c;
    std::mt19937_64 rng(99);
    auto uniform = [&] { return (static_cast<double>(rng() >> 11) / 9007199254740992.0) * 2 - 1; };

    RelationSchema schema({"no_relation", "rel:a", "rel:b"}, "no_relation", {"PERSON", "ORG"});
    ReModelConfig cfg;
    cfg.hash_dim = 32;
    cfg.repr_dim = 8;
    cfg.seed = 12;
    const auto model = make_re_model(schema, cfg);
    const std::size_t n_labels = 3;

    for (int instance = 0; instance < 20; ++instance) {
        // a few random encoded examples per instance
        const std::size_t n = 2 + uniform_below(rng, 6);
        std::vector<std::vector<double>> reprs;
        std::vector<std::size_t> ys;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::string> tokens;
            const std::size_t len = 4 + uniform_below(rng, 6);
            for (std::size_t t = 0; t < len; ++t)
                tokens.push_back("w" + std::to_string(uniform_below(rng, 30)));
            auto ex = make_example("x", tokens, 0, 0, "PERSON", len - 1, len - 1, "ORG",
                                   schema.relations()[uniform_below(rng, n_labels)]);
            reprs.push_back(encode_example(model, ex).h);
            ys.push_back(uniform_below(rng, n_labels));
        }
        std::vector<double> w(n_labels * 2 * cfg.repr_dim), b(n_labels);
        for (auto& v : w) v = uniform();
        for (auto& v : b) v = uniform();
        const double l2 = 1e-3;

        std::vector<double> gw, gb;
        training_gradient(w, b, reprs, ys, n_labels, l2, gw, gb);

        const double h = 1e-6;
        std::vector<double> fd_w(w.size()), fd_b(b.size());
        for (std::size_t j = 0; j < w.size(); ++j) {
            auto wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            fd_w[j] = (training_loss(wp, b, reprs, ys, n_labels, l2) -
                       training_loss(wm, b, reprs, ys, n_labels, l2)) /
                      (2 * h);
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            auto bp = b, bm = b;
            bp[j] += h;
            bm[j] -= h;
            fd_b[j] = (training_loss(w, bp, reprs, ys, n_labels, l2) -
                       training_loss(w, bm, reprs, ys, n_labels, l2)) /
                      (2 * h);
        }
        double diff2 = 0, ga2 = 0, gf2 = 0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            diff2 += (gw[j] - fd_w[j]) * (gw[j] - fd_w[j]);
            ga2 += gw[j] * gw[j];
            gf2 += fd_w[j] * fd_w[j];
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            diff2 += (gb[j] - fd_b[j]) * (gb[j] - fd_b[j]);
            ga2 += gb[j] * gb[j];
            gf2 += fd_b[j] * fd_b[j];
        }
        const double rel =
            std::sqrt(diff2) / std::max({std::sqrt(ga2), std::sqrt(gf2), 1e-12});
        c.require(rel <= 1e-4,
                  "relative gradient error " + std::to_string(rel) + " at instance " +
                      std::to_string(instance));
    }
    return c;
}

// ---- 3. Micro-F1 oracle ----------------------------------------------------

Check check_micro_f1() {
    Check c;
    const std::vector<std::string> labels{"no_relation", "a", "b", "c"};
    const RelationSchema schema(labels, "no_relation", {});

    auto gold_with = [](const std::vector<std::string>& relations) {
        std::vector<RelationExample> out;
        for (std::size_t i = 0; i < relations.size(); ++i)
            out.push_back(make_example("g" + std::to_string(i), {"x", "y"}, 0, 0, "PERSON", 1, 1,
                                       "PERSON", relations[i]));
        return out;
    };

    // hand case: 3 gold positives + 1 gold no_relation; 2 correct positives,
    // one positive flipped to no_relation, the no_relation flipped positive
    const auto gold = gold_with({"a", "b", "c", "no_relation"});
    const std::vector<std::pair<std::string, std::string>> preds{
        {"g0", "a"}, {"g1", "b"}, {"g2", "no_relation"}, {"g3", "a"}};
    const auto hand = micro_f1_score(preds, gold, schema);
    c.require(std::abs(hand.precision - 2.0 / 3.0) <= 1e-12, "hand-case precision");
    c.require(std::abs(hand.recall - 2.0 / 3.0) <= 1e-12, "hand-case recall");
    c.require(std::abs(hand.micro_f1 - 2.0 / 3.0) <= 1e-12, "hand-case F1");

    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 200 && c.ok; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 40);
        std::vector<std::string> gold_rels;
        for (std::size_t i = 0; i < n; ++i)
            gold_rels.push_back(labels[uniform_below(rng, labels.size())]);
        const auto g = gold_with(gold_rels);
        std::vector<std::pair<std::string, std::string>> p;
        for (const auto& ex : g)
            p.emplace_back(ex.id, labels[uniform_below(rng, labels.size())]);

        // independent brute-force counting
        std::size_t gold_pos = 0, pred_pos = 0, correct = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g[i].relation != "no_relation") ++gold_pos;
            if (p[i].second != "no_relation") {
                ++pred_pos;
                if (p[i].second == g[i].relation) ++correct;
            }
        }
        const auto r = micro_f1_score(p, g, schema);
        c.require(r.n_gold_positive == gold_pos, "gold positive count");
        c.require(r.n_pred_positive == pred_pos, "predicted positive count");
        c.require(r.n_correct_positive == correct, "correct positive count");
        const double prec = pred_pos ? double(correct) / pred_pos : 0.0;
        const double rec = gold_pos ? double(correct) / gold_pos : 0.0;
        const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        c.require(std::abs(r.micro_f1 - f1) <= 1e-12, "F1 vs oracle");
    }
    return c;
}

// ---- 4. Marker round-trip --------------------------------------------------

Check check_marker_round_trip() {
    Check c;
    std::mt19937_64 rng(808);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + uniform_below(rng, 14);
        std::vector<std::string> tokens;
        for (std::size_t i = 0; i < n; ++i)
            tokens.push_back("t" + std::to_string(uniform_below(rng, 40)));
        std::size_t a_start, a_end, b_start, b_end;
        while (true) {
            a_start = uniform_below(rng, n);
            a_end = a_start + uniform_below(rng, std::min<std::size_t>(3, n - a_start));
            b_start = uniform_below(rng, n);
            b_end = b_start + uniform_below(rng, std::min<std::size_t>(3, n - b_start));
            if (a_end < b_start || b_end < a_start) break;
        }
        const auto ex = make_example("e", tokens, a_start, a_end, "PERSON", b_start, b_end,
                                     "ORGANIZATION", "r");
        const auto marked = mark_entities(ex);
        // fixed overhead: two marker pairs, two type-bracket pairs, two types
        c.require(marked.tokens.size() == tokens.size() + 10,
                  "marked length " + std::to_string(marked.tokens.size()) + " != " +
                      std::to_string(tokens.size() + 10));
        c.require(strip_markers(marked) == tokens, "strip does not recover the tokens");
        if (!c.ok) break;
    }
    return c;
}

// ---- 5. Fusion contract ----------------------------------------------------

Check check_fusion_contract() {
    Check c;
    auto corpus = make_synthetic_corpus(1717, 6, 20);
    const auto train = sample_k_shot(corpus.train_pool, {4, 1}, corpus.schema);
    ReModelConfig cfg;
    cfg.hash_dim = 256;
    cfg.repr_dim = 16;
    cfg.epochs = 10;
    cfg.seed = 2;
    const auto model = train_re_model(train, corpus.schema, cfg);
    const auto store = build_datastore(model, train);

    // (a) full agreement: the scripted LLM echoes the RE prediction
    {
        json transcript = json::object();
        for (const auto& ex : corpus.test)
            transcript["inference:" + ex.id] =
                "Relation: " + predict_relation(model, ex).relation;
        ScriptedClient client(transcript);
        PredictOptions opts;
        opts.mode = AblationMode::full;
        opts.knn_k = 4;
        for (const auto& ex : corpus.test) {
            const auto o = predict_example(ex, model, store, train, client, corpus.schema, opts);
            c.require(o.source == FusionSource::agreement, "agreement expected");
            c.require(o.final_relation == o.p_re, "agreement must keep the shared label");
        }
        c.require(client.calls(PromptKind::selector) == 0, "agreement made a selector call");
    }

    // (b) disagreement with an in-pair selector answer
    {
        const auto& query = corpus.test.front();
        for (const std::string answer : {"rel:alpha", "rel:beta"}) {
            ScriptedClient client(json{{"selector:" + query.id, "Relation: " + answer}});
            const auto o = integrated_predict(query, "rel:alpha", "rel:beta", train, model, client,
                                              corpus.schema, {});
            c.require(o.source == FusionSource::selector, "selector expected");
            c.require(o.final_relation == answer, "selector answer not kept");
            c.require(o.final_relation == o.p_re || o.final_relation == o.p_llm,
                      "selector answer outside the pair");
        }
    }

    // (c) off-pair and garbage answers fall back to no_relation
    {
        const auto& query = corpus.test.front();
        for (const std::string answer : {"Relation: rel:gamma", "utter nonsense", ""}) {
            ScriptedClient client(json{{"selector:" + query.id, answer}});
            const auto o = integrated_predict(query, "rel:alpha", "rel:beta", train, model, client,
                                              corpus.schema, {});
            c.require(o.source == FusionSource::fallback, "fallback expected");
            c.require(o.final_relation == corpus.schema.no_relation_label(),
                      "fallback must yield no_relation");
        }
    }
    return c;
}

// ---- 6-9. End-to-end pipeline checks ---------------------------------------

struct PipelineFixture {
    TempDir dir{"acceptance"};
    SyntheticCorpus corpus = make_synthetic_corpus(2026, 40, 200);
    ExperimentConfig config;

    PipelineFixture() {
        save_dataset(dir.file("train.jsonl"), corpus.train_pool);
        save_dataset(dir.file("test.jsonl"), corpus.test);
        write_json(dir.file("schema.json"), schema_to_json(corpus.schema));
        write_json(dir.file("transcript.json"), make_cooperative_transcript(corpus));

        config.train_path = dir.file("train.jsonl");
        config.test_path = dir.file("test.jsonl");
        config.schema_path = dir.file("schema.json");
        config.output_dir = dir.file("out");
        config.k_shot = 8;
        config.knn_k = 8;
        config.selector_m = 4;
        config.sampling_seed = 11;
        config.model_seed = 13;
        config.model.hash_dim = 1024;
        config.model.repr_dim = 32;
        config.model.epochs = 25;
        config.llm.transcript = dir.file("transcript.json").string();
    }
};

Check check_end_to_end_benchmark() {
    Check c;
    PipelineFixture fx;

    fx.config.mode = AblationMode::pure_re;
    fx.config.output_dir = fx.dir.file("bench-pure");
    const auto pure = run_experiment(fx.config);
    c.require(pure.report.micro_f1 >= 0.90,
              "pure_re micro-F1 " + std::to_string(pure.report.micro_f1) + " < 0.90");

    fx.config.mode = AblationMode::full;
    fx.config.output_dir = fx.dir.file("bench-full");
    const auto full = run_experiment(fx.config);
    c.require(full.report.micro_f1 >= pure.report.micro_f1,
              "full micro-F1 " + std::to_string(full.report.micro_f1) + " below pure_re " +
                  std::to_string(pure.report.micro_f1));
    c.require(full.report.n_examples == 200, "test set must stay whole");
    return c;
}

Check check_ablation_grid() {
    Check c;
    PipelineFixture fx;
    fx.config.output_dir = fx.dir.file("grid");
    const auto reports = run_ablation_grid(fx.config);
    c.require(reports.size() == 5, "expected five ablation reports");
    for (const char* name : {"full", "pure_re", "pure_llm", "llm_aug_re", "re_aug_llm"})
        c.require(reports.count(name) == 1, std::string("missing mode ") + name);

    // pure_re must equal a direct RE-only evaluation bit for bit
    const auto schema = RelationSchema::from_json_file(fx.config.schema_path);
    const auto pool = load_dataset(fx.config.train_path, schema);
    const auto gold = sample_k_shot(pool, {fx.config.k_shot, fx.config.sampling_seed}, schema);
    auto mcfg = fx.config.model;
    mcfg.seed = fx.config.model_seed;
    const auto model = train_re_model(gold, schema, mcfg);
    std::string expected = "example_id\tp_re\tp_llm\tfinal\tsource\n";
    std::vector<std::pair<std::string, std::string>> preds;
    for (const auto& ex : fx.corpus.test) {
        const auto rel = predict_relation(model, ex).relation;
        preds.emplace_back(ex.id, rel);
        expected += ex.id + "\t" + rel + "\t" + rel + "\t" + rel + "\tagreement\n";
    }
    const std::string written = read_file(fx.config.output_dir / "pure_re" / "predictions.tsv");
    c.require(written == expected, "pure_re predictions differ from the RE-only evaluation");

    const auto direct = micro_f1_score(preds, fx.corpus.test, schema);
    c.require(reports.at("pure_re").micro_f1 == direct.micro_f1,
              "pure_re report differs from the RE-only score");
    return c;
}

Check check_augmentation_doubling() {
    Check c;
    PipelineFixture fx;
    const auto schema = RelationSchema::from_json_file(fx.config.schema_path);
    const auto pool = load_dataset(fx.config.train_path, schema);
    const auto gold = sample_k_shot(pool, {fx.config.k_shot, fx.config.sampling_seed}, schema);

    {
        auto client = ScriptedClient::from_file(fx.config.llm.transcript);
        const auto [merged, report] =
            augment_training_set(gold, schema, *client, {fx.config.k_shot, 2});
        c.require(merged.size() == 2 * gold.size(),
                  "cooperative merge size " + std::to_string(merged.size()) + " != " +
                      std::to_string(2 * gold.size()));
        c.require(report.accepted == gold.size(), "accepted != K-shot size");
    }
    {
        ScriptedClient client(json{{"__default__", "no structured output here"}});
        const auto [merged, report] =
            augment_training_set(gold, schema, client, {fx.config.k_shot, 2});
        c.require(merged.size() == gold.size(), "malformed transcript must leave the set alone");
        c.require(report.accepted == 0, "malformed transcript accepted something");
    }
    return c;
}

Check check_determinism() {
    Check c;
    PipelineFixture fx;
    fx.config.mode = AblationMode::full;
    fx.config.output_dir = fx.dir.file("det-a");
    const auto a = run_experiment(fx.config);
    fx.config.output_dir = fx.dir.file("det-b");
    const auto b = run_experiment(fx.config);
    c.require(read_file(a.predictions_path) == read_file(b.predictions_path),
              "predictions files differ between identical runs");
    c.require(read_file(a.report_path) == read_file(b.report_path),
              "reports differ between identical runs");
    c.require(!read_file(a.predictions_path).empty(), "predictions file is empty");
    return c;
}

// ---- harness ----------------------------------------------------------------

int run_all() {
    struct Criterion {
        const char* name;
        std::function<Check()> fn;
        double budget_sec;  // 0 = no budget
    };
    const std::vector<Criterion> criteria{
        {"1 KNN oracle equivalence (1000 cases)", check_knn_oracle, 5.0},
        {"2 gradient vs central finite differences (20 instances)", check_gradient, 10.0},
        {"3 micro-F1 counting oracle + hand case", check_micro_f1, 0.0},
        {"4 marker round-trip over 500 random examples", check_marker_round_trip, 0.0},
        {"5 fusion contract (agreement/selector/fallback)", check_fusion_contract, 0.0},
        {"6 end-to-end synthetic benchmark", check_end_to_end_benchmark, 60.0},
        {"7 ablation grid with RE-only identity", check_ablation_grid, 0.0},
        {"8 augmentation doubling and malformed resilience", check_augmentation_doubling, 0.0},
        {"9 byte-identical reruns", check_determinism, 0.0},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Check c;
        try {
            c = criterion.fn();
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criterion.budget_sec > 0 && elapsed > criterion.budget_sec) {
            c.ok = false;
            c.detail = "exceeded time budget: " + std::to_string(elapsed) + "s > " +
                       std::to_string(criterion.budget_sec) + "s";
        }
        std::printf("[%s] %s (%.2fs)%s%s\n", c.ok ? "PASS" : "FAIL", criterion.name, elapsed,
                    c.ok ? "" : " -- ", c.ok ? "" : c.detail.c_str());
        failures += !c.ok;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures ? 1 : 0;
}

}  // namespace

int main() { return run_all(); }
