#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsare/corpus.hpp"
#include "dsare/llm_client.hpp"

namespace dsare {

// Bump whenever any template text changes; recorded in run manifests so
// experiment outputs stay comparable.
inline constexpr const char* kPromptTemplateVersion = "v1";

// A labeled example rendered inside a prompt for in-context learning.
struct Demonstration {
    RelationExample example;
    std::string label;
};

struct ParsedRelation {
    std::optional<std::string> relation;  // always a schema label when set
    std::string raw;
};

// Task instruction naming the candidate relations, demonstrations in the
// given order (callers pass nearest-first), then the query with the relation
// line left blank.
Prompt render_inference_prompt(const RelationSchema& schema,
                               const std::vector<Demonstration>& neighbors,
                               const RelationExample& query);

// Binary-choice prompt between rel_a and rel_b with the support examples
// grouped per relation (rel_a block first). Throws if rel_a == rel_b.
Prompt render_selector_prompt(const RelationSchema& schema, const std::string& rel_a,
                              const std::string& rel_b,
                              const std::vector<Demonstration>& support,
                              const RelationExample& query);

// Requests n new line-keyed samples for `relation`, seeded with the given
// examples rendered in the same format.
Prompt render_augmentation_prompt(const RelationSchema& schema, const std::string& relation,
                                  const std::vector<RelationExample>& seed_examples,
                                  std::size_t n);

// Finds the earliest schema label in the normalized text (lowercased,
// trimmed, optional "Relation:" prefix dropped); ties at the same position
// go to the longest label. No match leaves `relation` empty.
ParsedRelation parse_relation_output(const std::string& text, const RelationSchema& schema);

}  // namespace dsare
