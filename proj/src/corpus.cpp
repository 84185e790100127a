#include "dsare/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dsare/util.hpp"

namespace dsare {

using nlohmann::json;

std::string RelationExample::subject_text() const {
    return join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(subj_start),
                                         tokens.begin() + static_cast<std::ptrdiff_t>(subj_end) + 1));
}

std::string RelationExample::object_text() const {
    return join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(obj_start),
                                         tokens.begin() + static_cast<std::ptrdiff_t>(obj_end) + 1));
}

std::string RelationExample::sentence_text() const {
    return join(tokens);
}

RelationSchema::RelationSchema(std::vector<std::string> relations, std::string no_relation_label,
                               std::vector<std::string> entity_types)
    : relations_(std::move(relations)),
      no_relation_(std::move(no_relation_label)),
      entity_types_(std::move(entity_types)) {
    for (std::size_t i = 0; i < relations_.size(); ++i) {
        if (relations_[i].empty()) throw std::invalid_argument("schema: empty relation label");
        if (!relation_index_.emplace(relations_[i], i).second)
            throw std::invalid_argument("schema: duplicate relation label '" + relations_[i] + "'");
    }
    if (!relation_index_.count(no_relation_))
        throw std::invalid_argument("schema: no_relation label '" + no_relation_ +
                                    "' is not in the relation list");
    for (const auto& t : entity_types_) {
        if (t.empty()) throw std::invalid_argument("schema: empty entity type");
        entity_type_by_lower_.emplace(to_lower(t), t);
    }
}

RelationSchema RelationSchema::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path.string());
    json j = json::parse(in);
    if (!j.contains("relations") || !j["relations"].is_array())
        throw std::runtime_error("schema file: missing 'relations' array");
    if (!j.contains("no_relation") || !j["no_relation"].is_string())
        throw std::runtime_error("schema file: missing 'no_relation' string");
    std::vector<std::string> types;
    if (j.contains("entity_types")) types = j["entity_types"].get<std::vector<std::string>>();
    return RelationSchema(j["relations"].get<std::vector<std::string>>(),
                          j["no_relation"].get<std::string>(), std::move(types));
}

std::optional<std::size_t> RelationSchema::relation_index(const std::string& label) const {
    auto it = relation_index_.find(label);
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> RelationSchema::canonical_entity_type(const std::string& type) const {
    auto it = entity_type_by_lower_.find(to_lower(type));
    if (it == entity_type_by_lower_.end()) return std::nullopt;
    return it->second;
}

void validate_example(const RelationExample& ex, const RelationSchema* schema) {
    if (ex.tokens.empty()) throw std::invalid_argument("empty token list");
    const std::size_t n = ex.tokens.size();
    if (ex.subj_start > ex.subj_end || ex.subj_end >= n)
        throw std::invalid_argument("invalid span (subj_start=" + std::to_string(ex.subj_start) +
                                    ", subj_end=" + std::to_string(ex.subj_end) + ", len=" +
                                    std::to_string(n) + ")");
    if (ex.obj_start > ex.obj_end || ex.obj_end >= n)
        throw std::invalid_argument("invalid span (obj_start=" + std::to_string(ex.obj_start) +
                                    ", obj_end=" + std::to_string(ex.obj_end) + ", len=" +
                                    std::to_string(n) + ")");
    const bool disjoint = ex.subj_end < ex.obj_start || ex.obj_end < ex.subj_start;
    if (!disjoint) throw std::invalid_argument("overlapping subject/object spans");
    if (ex.subj_type.empty()) throw std::invalid_argument("empty subj_type");
    if (ex.obj_type.empty()) throw std::invalid_argument("empty obj_type");
    if (schema && !ex.relation.empty() && !schema->has_relation(ex.relation))
        throw std::invalid_argument("unknown relation label '" + ex.relation + "'");
}

namespace {

std::size_t require_index(const json& rec, const char* field, std::size_t record_idx) {
    if (!rec.contains(field))
        throw std::runtime_error("record " + std::to_string(record_idx) + ": missing field '" +
                                 field + "'");
    const auto& v = rec[field];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw std::runtime_error("record " + std::to_string(record_idx) + ": invalid span (field '" +
                                 field + "' is not a non-negative integer)");
    return v.get<std::size_t>();
}

std::string require_string(const json& rec, const char* field, std::size_t record_idx) {
    if (!rec.contains(field) || !rec[field].is_string())
        throw std::runtime_error("record " + std::to_string(record_idx) + ": missing field '" +
                                 field + "'");
    return rec[field].get<std::string>();
}

RelationExample parse_record(const json& rec, std::size_t record_idx, const RelationSchema& schema) {
    if (!rec.is_object())
        throw std::runtime_error("record " + std::to_string(record_idx) + ": not a JSON object");
    RelationExample ex;
    ex.id = require_string(rec, "id", record_idx);
    if (!rec.contains("token") || !rec["token"].is_array())
        throw std::runtime_error("record " + std::to_string(record_idx) + ": missing field 'token'");
    for (const auto& t : rec["token"]) {
        if (!t.is_string())
            throw std::runtime_error("record " + std::to_string(record_idx) +
                                     ": field 'token' contains a non-string entry");
        ex.tokens.push_back(t.get<std::string>());
    }
    ex.subj_start = require_index(rec, "subj_start", record_idx);
    ex.subj_end = require_index(rec, "subj_end", record_idx);
    ex.obj_start = require_index(rec, "obj_start", record_idx);
    ex.obj_end = require_index(rec, "obj_end", record_idx);
    ex.subj_type = require_string(rec, "subj_type", record_idx);
    ex.obj_type = require_string(rec, "obj_type", record_idx);
    ex.relation = require_string(rec, "relation", record_idx);
    try {
        validate_example(ex, &schema);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("record " + std::to_string(record_idx) + ": " + e.what());
    }
    return ex;
}

}  // namespace

std::vector<RelationExample> load_dataset(const std::filesystem::path& path,
                                          const RelationSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    std::vector<RelationExample> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return out;

    if (text[first] == '[') {
        json arr = json::parse(text);
        out.reserve(arr.size());
        for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_record(arr[i], i, schema));
        return out;
    }

    std::istringstream lines(text);
    std::string line;
    std::size_t idx = 0;
    while (std::getline(lines, line)) {
        if (trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("record " + std::to_string(idx) + ": " + e.what());
        }
        out.push_back(parse_record(rec, idx, schema));
        ++idx;
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<RelationExample>& examples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
    for (const auto& ex : examples) {
        json rec{{"id", ex.id},
                 {"token", ex.tokens},
                 {"subj_start", ex.subj_start},
                 {"subj_end", ex.subj_end},
                 {"obj_start", ex.obj_start},
                 {"obj_end", ex.obj_end},
                 {"subj_type", ex.subj_type},
                 {"obj_type", ex.obj_type},
                 {"relation", ex.relation}};
        out << rec.dump() << '\n';
    }
}

std::vector<RelationExample> sample_k_shot(const std::vector<RelationExample>& examples,
                                           const KShotSpec& spec, const RelationSchema& schema) {
    if (spec.k_per_relation == 0) throw std::invalid_argument("k_per_relation must be >= 1");

    std::vector<std::vector<std::size_t>> by_relation(schema.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        auto r = schema.relation_index(examples[i].relation);
        if (!r)
            throw std::invalid_argument("unknown relation label '" + examples[i].relation + "'");
        by_relation[*r].push_back(i);
    }

    std::mt19937_64 rng(spec.seed);
    std::vector<RelationExample> out;
    for (std::size_t r = 0; r < by_relation.size(); ++r) {
        auto chosen = sample_without_replacement(by_relation[r], spec.k_per_relation, rng);
        std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
            return examples[a].id < examples[b].id;
        });
        for (std::size_t i : chosen) out.push_back(examples[i]);
    }
    return out;
}

MarkedText mark_entities(const RelationExample& ex) {
    validate_example(ex);

    MarkedText out;
    out.tokens.reserve(ex.tokens.size() + 10);
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
        if (i == ex.subj_start) {
            out.subj_anchor = out.tokens.size();
            out.tokens.insert(out.tokens.end(), {"@", "*", to_lower(ex.subj_type), "*"});
        }
        if (i == ex.obj_start) {
            out.obj_anchor = out.tokens.size();
            out.tokens.insert(out.tokens.end(), {"#", "^", to_lower(ex.obj_type), "^"});
        }
        out.tokens.push_back(ex.tokens[i]);
        if (i == ex.subj_end) {
            out.subj_close = out.tokens.size();
            out.tokens.emplace_back("@");
        }
        if (i == ex.obj_end) {
            out.obj_close = out.tokens.size();
            out.tokens.emplace_back("#");
        }
    }
    return out;
}

std::vector<std::string> strip_markers(const MarkedText& marked) {
    std::vector<bool> drop(marked.tokens.size(), false);
    for (std::size_t off = 0; off < 4; ++off) {
        drop.at(marked.subj_anchor + off) = true;
        drop.at(marked.obj_anchor + off) = true;
    }
    drop.at(marked.subj_close) = true;
    drop.at(marked.obj_close) = true;
    std::vector<std::string> out;
    out.reserve(marked.tokens.size() - 10);
    for (std::size_t i = 0; i < marked.tokens.size(); ++i)
        if (!drop[i]) out.push_back(marked.tokens[i]);
    return out;
}

}  // namespace dsare
