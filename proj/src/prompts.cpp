#include "dsare/prompts.hpp"

#include <stdexcept>

#include "dsare/util.hpp"

namespace dsare {

namespace {

std::string candidate_list(const RelationSchema& schema) {
    return join(schema.relations(), ", ");
}

void append_example(std::string& out, const RelationExample& ex, const std::string& label) {
    out += "Sentence: " + ex.sentence_text() + "\n";
    out += "Subject: " + ex.subject_text() + " (type: " + ex.subj_type + ")\n";
    out += "Object: " + ex.object_text() + " (type: " + ex.obj_type + ")\n";
    out += "Relation:";
    if (!label.empty()) out += " " + label;
    out += "\n";
}

}  // namespace

Prompt render_inference_prompt(const RelationSchema& schema,
                               const std::vector<Demonstration>& neighbors,
                               const RelationExample& query) {
    std::string text;
    text +=
        "Task: identify the relation between the subject entity and the object "
        "entity in the final sentence.\n";
    text += "Candidate relations: " + candidate_list(schema) + ".\n";
    text +=
        "Answer with a single line of the form \"Relation: <label>\", where "
        "<label> is exactly one of the candidate relations.\n";
    for (const auto& demo : neighbors) {
        text += "\n";
        append_example(text, demo.example, demo.label);
    }
    text += "\n";
    append_example(text, query, "");
    return Prompt{PromptKind::inference, query.id, std::move(text)};
}

Prompt render_selector_prompt(const RelationSchema& schema, const std::string& rel_a,
                              const std::string& rel_b,
                              const std::vector<Demonstration>& support,
                              const RelationExample& query) {
    if (rel_a == rel_b)
        throw std::invalid_argument("selector needs two distinct relations, got '" + rel_a + "'");
    if (!schema.has_relation(rel_a) || !schema.has_relation(rel_b))
        throw std::invalid_argument("selector relations must be schema labels");

    std::string text;
    text +=
        "Task: decide which one of two candidate relations holds between the "
        "subject entity and the object entity in the final sentence.\n";
    text += "The answer must be either \"" + rel_a + "\" or \"" + rel_b + "\".\n";
    text += "Answer with a single line of the form \"Relation: <label>\".\n";
    for (const std::string& rel : {rel_a, rel_b}) {
        text += "\nExamples labeled " + rel + ":\n";
        for (const auto& demo : support) {
            if (demo.label != rel) continue;
            text += "\n";
            append_example(text, demo.example, demo.label);
        }
    }
    text += "\n";
    append_example(text, query, "");
    return Prompt{PromptKind::selector, query.id, std::move(text)};
}

Prompt render_augmentation_prompt(const RelationSchema& schema, const std::string& relation,
                                  const std::vector<RelationExample>& seed_examples,
                                  std::size_t n) {
    if (!schema.has_relation(relation))
        throw std::invalid_argument("unknown relation label '" + relation + "'");

    std::string text;
    text +=
        "Task: write new training samples for a relation extraction task.\n"
        "Each sample has six components: a context text, a subject entity, an "
        "object entity, the subject entity type, the object entity type and "
        "the relation.\n";
    text += "Write " + std::to_string(n) + " new sample" + (n == 1 ? "" : "s") +
            " for the relation \"" + relation + "\".\n";
    text +=
        "Format every sample as six lines keyed \"Context:\", \"Subject:\", "
        "\"SubjectType:\", \"Object:\", \"ObjectType:\" and \"Relation:\", with a "
        "blank line between samples. The subject and object entities must appear "
        "verbatim in the context text.\n";
    if (!seed_examples.empty()) text += "\nExisting samples for this relation:\n";
    for (const auto& ex : seed_examples) {
        text += "\n";
        text += "Context: " + ex.sentence_text() + "\n";
        text += "Subject: " + ex.subject_text() + "\n";
        text += "SubjectType: " + ex.subj_type + "\n";
        text += "Object: " + ex.object_text() + "\n";
        text += "ObjectType: " + ex.obj_type + "\n";
        text += "Relation: " + relation + "\n";
    }
    return Prompt{PromptKind::augmentation, relation, std::move(text)};
}

ParsedRelation parse_relation_output(const std::string& text, const RelationSchema& schema) {
    ParsedRelation out;
    out.raw = text;

    std::string haystack = to_lower(trim(text));
    const std::string prefix = "relation:";
    if (haystack.rfind(prefix, 0) == 0) haystack = trim(haystack.substr(prefix.size()));

    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < schema.relations().size(); ++i) {
        const std::string needle = to_lower(schema.relations()[i]);
        const std::size_t pos = haystack.find(needle);
        if (pos == std::string::npos) continue;
        if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
            best_pos = pos;
            best_len = needle.size();
            best_idx = i;
        }
    }
    if (best_pos != std::string::npos) out.relation = schema.relations()[best_idx];
    return out;
}

}  // namespace dsare
