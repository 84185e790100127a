#include "dsare/fusion.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "dsare/prompts.hpp"
#include "dsare/util.hpp"

namespace dsare {

const char* to_string(FusionSource source) {
    switch (source) {
        case FusionSource::agreement: return "agreement";
        case FusionSource::selector: return "selector";
        case FusionSource::fallback: return "fallback";
    }
    return "unknown";
}

const char* to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::full: return "full";
        case AblationMode::pure_re: return "pure_re";
        case AblationMode::pure_llm: return "pure_llm";
        case AblationMode::llm_aug_re: return "llm_aug_re";
        case AblationMode::re_aug_llm: return "re_aug_llm";
    }
    return "unknown";
}

AblationMode parse_ablation_mode(const std::string& name) {
    if (name == "full") return AblationMode::full;
    if (name == "pure_re") return AblationMode::pure_re;
    if (name == "pure_llm") return AblationMode::pure_llm;
    if (name == "llm_aug_re") return AblationMode::llm_aug_re;
    if (name == "re_aug_llm") return AblationMode::re_aug_llm;
    throw std::invalid_argument("unknown ablation mode '" + name + "'");
}

namespace {

// Up to m training examples labeled `relation`, nearest to the query
// representation (ties by id), or a seeded random draw.
std::vector<Demonstration> support_for(const std::string& relation,
                                       const std::vector<RelationExample>& train,
                                       const ReModel& model, const std::vector<double>& query_h,
                                       const RelationExample& query,
                                       const SelectorOptions& options) {
    std::vector<const RelationExample*> candidates;
    for (const auto& ex : train)
        if (ex.relation == relation) candidates.push_back(&ex);

    if (options.sampling == SelectorSampling::random) {
        std::mt19937_64 rng(derive_seed(options.seed, "selector:" + query.id));
        auto chosen = sample_without_replacement(candidates, options.m, rng);
        std::vector<Demonstration> out;
        for (const auto* ex : chosen) out.push_back({*ex, relation});
        return out;
    }

    struct Scored {
        double d2;
        const RelationExample* ex;
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto* ex : candidates) {
        const auto h = encode_example(model, *ex).h;
        double d2 = 0.0;
        for (std::size_t j = 0; j < h.size(); ++j) {
            const double diff = h[j] - query_h[j];
            d2 += diff * diff;
        }
        scored.push_back({d2, ex});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        return a.ex->id < b.ex->id;
    });
    std::vector<Demonstration> out;
    for (std::size_t i = 0; i < scored.size() && i < options.m; ++i)
        out.push_back({*scored[i].ex, relation});
    return out;
}

std::string complete_for_query(LlmClient& client, const Prompt& prompt,
                               const RelationExample& query) {
    try {
        return client.complete(prompt);
    } catch (const TransportError& e) {
        throw TransportError("query " + query.id + ": " + e.what(), e.status);
    }
}

}  // namespace

FusionOutcome integrated_predict(const RelationExample& query, const std::string& p_re,
                                 const std::string& p_llm,
                                 const std::vector<RelationExample>& train, const ReModel& model,
                                 LlmClient& client, const RelationSchema& schema,
                                 const SelectorOptions& options) {
    if (!schema.has_relation(p_re))
        throw std::invalid_argument("p_re '" + p_re + "' is not a schema label");
    if (!schema.has_relation(p_llm))
        throw std::invalid_argument("p_llm '" + p_llm + "' is not a schema label");

    FusionOutcome outcome;
    outcome.p_re = p_re;
    outcome.p_llm = p_llm;
    if (p_re == p_llm) {
        outcome.final_relation = p_re;
        outcome.source = FusionSource::agreement;
        return outcome;
    }

    const auto query_h = encode_example(model, query).h;
    std::vector<Demonstration> support = support_for(p_re, train, model, query_h, query, options);
    const auto support_llm = support_for(p_llm, train, model, query_h, query, options);
    support.insert(support.end(), support_llm.begin(), support_llm.end());

    const Prompt prompt = render_selector_prompt(schema, p_re, p_llm, support, query);
    const std::string response = complete_for_query(client, prompt, query);
    outcome.selector_raw = response;

    const ParsedRelation parsed = parse_relation_output(response, schema);
    if (parsed.relation && (*parsed.relation == p_re || *parsed.relation == p_llm)) {
        outcome.final_relation = *parsed.relation;
        outcome.source = FusionSource::selector;
    } else {
        outcome.final_relation = schema.no_relation_label();
        outcome.source = FusionSource::fallback;
    }
    return outcome;
}

FusionOutcome predict_example(const RelationExample& query, const ReModel& model,
                              const Datastore& store, const std::vector<RelationExample>& train,
                              LlmClient& client, const RelationSchema& schema,
                              const PredictOptions& options) {
    const AblationMode mode = options.mode;

    if (mode == AblationMode::pure_re || mode == AblationMode::llm_aug_re) {
        const std::string p_re = predict_relation(model, query).relation;
        return FusionOutcome{p_re, FusionSource::agreement, p_re, p_re, std::nullopt};
    }

    // LLM inference, with KNN demonstrations unless running the bare LLM.
    std::vector<Demonstration> demos;
    if (mode != AblationMode::pure_llm) {
        const auto query_repr = encode_example(model, query);
        const auto neighbors = knn_query(store, query_repr, options.knn_k);
        std::unordered_map<std::string, const RelationExample*> by_id;
        for (const auto& ex : train) by_id.emplace(ex.id, &ex);
        for (const auto& n : neighbors) {
            auto it = by_id.find(n.example_id);
            if (it == by_id.end())
                throw std::runtime_error("datastore id '" + n.example_id +
                                         "' missing from the training set");
            demos.push_back({*it->second, n.relation});
        }
        if (options.reverse_demonstrations) std::reverse(demos.begin(), demos.end());
    }
    const Prompt prompt = render_inference_prompt(schema, demos, query);
    const std::string response = complete_for_query(client, prompt, query);
    const ParsedRelation parsed = parse_relation_output(response, schema);
    const std::string p_llm = parsed.relation.value_or(schema.no_relation_label());

    if (mode == AblationMode::pure_llm || mode == AblationMode::re_aug_llm)
        return FusionOutcome{p_llm, FusionSource::agreement, p_llm, p_llm, std::nullopt};

    const std::string p_re = predict_relation(model, query).relation;
    return integrated_predict(query, p_re, p_llm, train, model, client, schema, options.selector);
}

}  // namespace dsare
