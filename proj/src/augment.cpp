#include "dsare/augment.hpp"

#include <algorithm>
#include <array>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "dsare/prompts.hpp"
#include "dsare/util.hpp"

namespace dsare {

nlohmann::json AugmentationReport::to_json() const {
    nlohmann::json rejects = nlohmann::json::array();
    for (const auto& r : rejected) rejects.push_back({{"block", r.block}, {"reason", r.reason}});
    nlohmann::json per_rel = nlohmann::json::array();
    for (const auto& s : per_relation)
        per_rel.push_back(
            {{"relation", s.relation}, {"requested", s.requested}, {"accepted", s.accepted}});
    return nlohmann::json{{"requested", requested},
                          {"parsed", parsed},
                          {"accepted", accepted},
                          {"duplicates_dropped", duplicates_dropped},
                          {"rejected", std::move(rejects)},
                          {"per_relation", std::move(per_rel)}};
}

namespace {

enum Field { kContext, kSubject, kSubjectType, kObject, kObjectType, kRelation, kFieldCount };

const char* kFieldNames[kFieldCount] = {"Context", "Subject",    "SubjectType",
                                        "Object",  "ObjectType", "Relation"};

// "SubjectType:"-style keys, tolerating bullets, numbering, spaces and
// underscores in the key.
const std::regex kFieldLine(
    R"(^\s*(?:\d+[\.\)]\s*)?(?:[-*]\s*)?(context|subject\s*_?\s*type|subject|object\s*_?\s*type|object|relation)\s*:\s*(.*?)\s*$)",
    std::regex::icase);

std::optional<Field> classify_key(std::string key) {
    key = to_lower(key);
    key.erase(std::remove_if(key.begin(), key.end(),
                             [](char c) { return c == ' ' || c == '_' || c == '\t'; }),
              key.end());
    if (key == "context") return kContext;
    if (key == "subject") return kSubject;
    if (key == "subjecttype") return kSubjectType;
    if (key == "object") return kObject;
    if (key == "objecttype") return kObjectType;
    if (key == "relation") return kRelation;
    return std::nullopt;
}

struct BlockBuilder {
    std::array<std::optional<std::string>, kFieldCount> fields;
    std::string raw;
    bool empty() const {
        return std::all_of(fields.begin(), fields.end(), [](const auto& f) { return !f; });
    }
};

void flush_block(BlockBuilder& block, AugmentationParse& out) {
    if (block.empty()) {
        block = BlockBuilder{};
        return;
    }
    std::string missing;
    for (int f = 0; f < kFieldCount; ++f) {
        if (!block.fields[f] || block.fields[f]->empty()) {
            missing = kFieldNames[f];
            break;
        }
    }
    if (!missing.empty()) {
        out.rejects.push_back({trim(block.raw), "missing field: " + missing});
    } else {
        CandidateRecord rec;
        rec.context = *block.fields[kContext];
        rec.subject = *block.fields[kSubject];
        rec.subject_type = *block.fields[kSubjectType];
        rec.object = *block.fields[kObject];
        rec.object_type = *block.fields[kObjectType];
        rec.relation = *block.fields[kRelation];
        rec.raw = trim(block.raw);
        out.candidates.push_back(std::move(rec));
    }
    block = BlockBuilder{};
}

}  // namespace

AugmentationParse parse_augmented_records(const std::string& text) {
    AugmentationParse out;
    BlockBuilder block;

    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (trim(line).empty()) {
            flush_block(block, out);
            continue;
        }
        std::smatch m;
        if (!std::regex_match(line, m, kFieldLine)) continue;  // chatter
        const auto field = classify_key(m[1].str());
        if (!field) continue;
        // A fresh Context line starts the next block even without a
        // separating blank line.
        if (*field == kContext && block.fields[kContext]) flush_block(block, out);
        if (!block.fields[*field]) block.fields[*field] = m[2].str();
        block.raw += line + "\n";
    }
    flush_block(block, out);
    return out;
}

namespace {

std::optional<std::pair<std::size_t, std::size_t>> find_subsequence(
    const std::vector<std::string>& tokens, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
    for (std::size_t i = 0; i + needle.size() <= tokens.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (tokens[i + j] != needle[j]) {
                match = false;
                break;
            }
        }
        if (match) return std::make_pair(i, i + needle.size() - 1);
    }
    return std::nullopt;
}

}  // namespace

CandidateOutcome validate_candidate(const CandidateRecord& candidate, const RelationSchema& schema,
                                    const std::string& id) {
    const auto tokens = split_whitespace(candidate.context);
    if (tokens.empty()) return {std::nullopt, "empty context"};

    const auto subj_tokens = split_whitespace(candidate.subject);
    const auto subj_span = find_subsequence(tokens, subj_tokens);
    if (!subj_span) return {std::nullopt, "subject not in context"};

    const auto obj_tokens = split_whitespace(candidate.object);
    const auto obj_span = find_subsequence(tokens, obj_tokens);
    if (!obj_span) return {std::nullopt, "object not in context"};

    const bool disjoint = subj_span->second < obj_span->first || obj_span->second < subj_span->first;
    if (!disjoint) return {std::nullopt, "overlapping spans"};

    const auto subj_type = schema.canonical_entity_type(candidate.subject_type);
    if (!subj_type) return {std::nullopt, "unknown subject type: " + candidate.subject_type};
    const auto obj_type = schema.canonical_entity_type(candidate.object_type);
    if (!obj_type) return {std::nullopt, "unknown object type: " + candidate.object_type};

    if (!schema.has_relation(candidate.relation))
        return {std::nullopt, "unknown relation: " + candidate.relation};

    RelationExample ex;
    ex.id = id;
    ex.tokens = tokens;
    ex.subj_start = subj_span->first;
    ex.subj_end = subj_span->second;
    ex.obj_start = obj_span->first;
    ex.obj_end = obj_span->second;
    ex.subj_type = *subj_type;
    ex.obj_type = *obj_type;
    ex.relation = candidate.relation;
    validate_example(ex, &schema);
    return {std::move(ex), ""};
}

std::pair<std::vector<RelationExample>, AugmentationReport> augment_training_set(
    const std::vector<RelationExample>& train, const RelationSchema& schema, LlmClient& client,
    const AugmentOptions& options) {
    if (options.k_target_per_relation == 0)
        throw std::invalid_argument("k_target_per_relation must be >= 1");

    std::vector<RelationExample> merged = train;
    AugmentationReport report;

    auto dup_key = [](const RelationExample& ex) {
        return ex.sentence_text() + "\x1f" + ex.subject_text() + "\x1f" + ex.object_text() +
               "\x1f" + ex.relation;
    };
    std::unordered_set<std::string> seen;
    for (const auto& ex : train) seen.insert(dup_key(ex));

    std::size_t next_id = 1;
    for (const auto& relation : schema.relations()) {
        std::vector<RelationExample> seeds;
        for (const auto& ex : train)
            if (ex.relation == relation) seeds.push_back(ex);
        if (seeds.empty()) continue;

        RelationAugmentationStats stats;
        stats.relation = relation;
        for (int attempt = 0; attempt <= options.refill_retries; ++attempt) {
            if (stats.accepted >= options.k_target_per_relation) break;
            const std::size_t want = options.k_target_per_relation - stats.accepted;
            const Prompt prompt = render_augmentation_prompt(schema, relation, seeds, want);
            const std::string response = client.complete(prompt);
            stats.requested += want;
            report.requested += want;

            AugmentationParse parsed = parse_augmented_records(response);
            report.parsed += parsed.candidates.size();
            for (auto& reject : parsed.rejects) report.rejected.push_back(std::move(reject));

            for (const auto& cand : parsed.candidates) {
                if (stats.accepted >= options.k_target_per_relation) {
                    report.rejected.push_back({cand.raw, "target reached"});
                    continue;
                }
                auto outcome =
                    validate_candidate(cand, schema, "aug-" + std::to_string(next_id));
                if (!outcome.example) {
                    report.rejected.push_back({cand.raw, outcome.reason});
                    continue;
                }
                if (!seen.insert(dup_key(*outcome.example)).second) {
                    ++report.duplicates_dropped;
                    continue;
                }
                ++next_id;
                merged.push_back(std::move(*outcome.example));
                ++stats.accepted;
                ++report.accepted;
            }
        }
        report.per_relation.push_back(std::move(stats));
    }
    return {std::move(merged), std::move(report)};
}

}  // namespace dsare
