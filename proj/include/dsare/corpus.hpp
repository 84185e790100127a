#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dsare {

// One labeled relation instance. Spans are inclusive token indices and the
// subject/object ranges never overlap.
struct RelationExample {
    std::string id;
    std::vector<std::string> tokens;
    std::size_t subj_start = 0;
    std::size_t subj_end = 0;
    std::size_t obj_start = 0;
    std::size_t obj_end = 0;
    std::string subj_type;
    std::string obj_type;
    std::string relation;

    std::string subject_text() const;
    std::string object_text() const;
    std::string sentence_text() const;
};

// Ordered relation label set (the no-relation label is itself a member)
// plus the entity-type vocabulary.
class RelationSchema {
public:
    RelationSchema() = default;
    RelationSchema(std::vector<std::string> relations, std::string no_relation_label,
                   std::vector<std::string> entity_types);

    static RelationSchema from_json_file(const std::filesystem::path& path);

    const std::vector<std::string>& relations() const { return relations_; }
    const std::string& no_relation_label() const { return no_relation_; }
    const std::vector<std::string>& entity_types() const { return entity_types_; }
    std::size_t size() const { return relations_.size(); }

    std::optional<std::size_t> relation_index(const std::string& label) const;
    bool has_relation(const std::string& label) const { return relation_index(label).has_value(); }
    // Case-insensitive lookup; returns the schema's own spelling.
    std::optional<std::string> canonical_entity_type(const std::string& type) const;

private:
    std::vector<std::string> relations_;
    std::string no_relation_;
    std::vector<std::string> entity_types_;
    std::unordered_map<std::string, std::size_t> relation_index_;
    std::unordered_map<std::string, std::string> entity_type_by_lower_;
};

struct KShotSpec {
    std::size_t k_per_relation = 8;
    std::uint64_t seed = 0;
};

// A sentence with the subject span wrapped in "@ * <type> * ... @" and the
// object span wrapped in "# ^ <type> ^ ... #". Anchor/close fields index the
// four punctuation marker tokens, so stripping is positional and exact.
struct MarkedText {
    std::vector<std::string> tokens;
    std::size_t subj_anchor = 0;  // opening "@"
    std::size_t subj_close = 0;   // closing "@"
    std::size_t obj_anchor = 0;   // opening "#"
    std::size_t obj_close = 0;    // closing "#"
};

// Throws std::invalid_argument naming the violated field. Schema checks
// (relation label, entity types) only run when a schema is supplied.
void validate_example(const RelationExample& ex, const RelationSchema* schema = nullptr);

// Reads newline-delimited or array-style JSON records with fields
// id, token, subj_start, subj_end, obj_start, obj_end, subj_type, obj_type,
// relation. Errors name the record index and the offending field.
std::vector<RelationExample> load_dataset(const std::filesystem::path& path,
                                          const RelationSchema& schema);

// Writes one JSON record per line in the same layout load_dataset reads.
void save_dataset(const std::filesystem::path& path, const std::vector<RelationExample>& examples);

// Seeded uniform sampling of min(K, count) examples per relation, without
// replacement. Output is sorted by (relation index, id) and is deterministic
// for a fixed (examples, spec) input.
std::vector<RelationExample> sample_k_shot(const std::vector<RelationExample>& examples,
                                           const KShotSpec& spec, const RelationSchema& schema);

MarkedText mark_entities(const RelationExample& ex);

// Positional inverse of mark_entities: drops the ten marker tokens.
std::vector<std::string> strip_markers(const MarkedText& marked);

}  // namespace dsare
