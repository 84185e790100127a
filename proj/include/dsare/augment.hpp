#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dsare/corpus.hpp"
#include "dsare/llm_client.hpp"

namespace dsare {

// Six line-keyed fields pulled out of one response block.
struct CandidateRecord {
    std::string context;
    std::string subject;
    std::string subject_type;
    std::string object;
    std::string object_type;
    std::string relation;
    std::string raw;  // the block as it appeared in the response
};

struct RejectedBlock {
    std::string block;
    std::string reason;
};

struct AugmentationParse {
    std::vector<CandidateRecord> candidates;
    std::vector<RejectedBlock> rejects;
};

// Rule-based extraction of Context/Subject/SubjectType/Object/ObjectType/
// Relation blocks. Blocks missing a field become rejects; surrounding
// chatter is ignored.
AugmentationParse parse_augmented_records(const std::string& text);

struct CandidateOutcome {
    std::optional<RelationExample> example;  // set on accept
    std::string reason;                      // set on reject
};

// Accepts iff the subject and object strings occur as contiguous token
// subsequences of the whitespace-tokenized context (first occurrence taken
// as the span), the spans are disjoint, the types are schema entity types
// (case-insensitive) and the relation is a schema label. The accepted
// example takes the supplied synthetic id.
CandidateOutcome validate_candidate(const CandidateRecord& candidate, const RelationSchema& schema,
                                    const std::string& id);

struct RelationAugmentationStats {
    std::string relation;
    std::size_t requested = 0;
    std::size_t accepted = 0;
};

struct AugmentationReport {
    std::size_t requested = 0;
    std::size_t parsed = 0;
    std::size_t accepted = 0;
    std::size_t duplicates_dropped = 0;
    std::vector<RejectedBlock> rejected;
    std::vector<RelationAugmentationStats> per_relation;

    nlohmann::json to_json() const;
};

struct AugmentOptions {
    std::size_t k_target_per_relation = 8;
    int refill_retries = 2;  // extra prompts per relation to refill rejected slots
};

// Per relation (in schema order), asks the LLM for k_target pseudo-samples,
// validates them, refills shortfalls up to the retry bound and appends the
// survivors to a copy of `train`. Gold examples are never touched; synthetic
// ids carry an "aug-" prefix; exact duplicates are dropped and counted.
std::pair<std::vector<RelationExample>, AugmentationReport> augment_training_set(
    const std::vector<RelationExample>& train, const RelationSchema& schema, LlmClient& client,
    const AugmentOptions& options);

}  // namespace dsare
