#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsare/corpus.hpp"
#include "dsare/llm_client.hpp"
#include "dsare/rebackend.hpp"
#include "dsare/retrieval.hpp"

namespace dsare {

enum class FusionSource { agreement, selector, fallback };
const char* to_string(FusionSource source);

// Final relation for one query plus where it came from. Invariants:
// agreement => p_re == p_llm == final; selector => final is p_re or p_llm;
// fallback => final is the schema's no-relation label.
struct FusionOutcome {
    std::string final_relation;
    FusionSource source = FusionSource::agreement;
    std::string p_re;
    std::string p_llm;
    std::optional<std::string> selector_raw;  // raw selector response, when one was made
};

enum class SelectorSampling { knn, random };

struct SelectorOptions {
    std::size_t m = 4;  // support examples per disputed relation
    SelectorSampling sampling = SelectorSampling::knn;
    std::uint64_t seed = 0;  // only used by random sampling
};

// Emits agreements directly; on disagreement retrieves up to m support
// examples per disputed relation from the training set, asks the selector
// and maps off-pair or unparseable answers to the no-relation label.
FusionOutcome integrated_predict(const RelationExample& query, const std::string& p_re,
                                 const std::string& p_llm,
                                 const std::vector<RelationExample>& train, const ReModel& model,
                                 LlmClient& client, const RelationSchema& schema,
                                 const SelectorOptions& options);

enum class AblationMode { full, pure_re, pure_llm, llm_aug_re, re_aug_llm };
const char* to_string(AblationMode mode);
AblationMode parse_ablation_mode(const std::string& name);

struct PredictOptions {
    AblationMode mode = AblationMode::full;
    std::size_t knn_k = 8;
    SelectorOptions selector;
    bool reverse_demonstrations = false;  // farthest-first demonstration order
};

// One query through the configured pipeline slice: RE-only modes never call
// the LLM, LLM-only modes make exactly one inference call, full mode adds
// the selector on disagreement.
FusionOutcome predict_example(const RelationExample& query, const ReModel& model,
                              const Datastore& store, const std::vector<RelationExample>& train,
                              LlmClient& client, const RelationSchema& schema,
                              const PredictOptions& options);

}  // namespace dsare
