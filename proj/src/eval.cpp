#include "dsare/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace dsare {

nlohmann::json EvalReport::to_json() const {
    return nlohmann::json{{"precision", precision},
                          {"recall", recall},
                          {"micro_f1", micro_f1},
                          {"n_examples", n_examples},
                          {"n_gold_positive", n_gold_positive},
                          {"n_pred_positive", n_pred_positive},
                          {"n_correct_positive", n_correct_positive}};
}

namespace {

std::string list_ids(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    std::string out;
    const std::size_t cap = 10;
    for (std::size_t i = 0; i < ids.size() && i < cap; ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    if (ids.size() > cap) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

}  // namespace

EvalReport micro_f1_score(const std::vector<std::pair<std::string, std::string>>& predictions,
                          const std::vector<RelationExample>& gold, const RelationSchema& schema) {
    std::unordered_map<std::string, std::string> pred_by_id;
    for (const auto& [id, label] : predictions) {
        if (!pred_by_id.emplace(id, label).second)
            throw std::invalid_argument("duplicate prediction id '" + id + "'");
    }

    std::vector<std::string> missing, extra;
    std::unordered_map<std::string, bool> gold_seen;
    for (const auto& ex : gold) {
        gold_seen.emplace(ex.id, true);
        if (!pred_by_id.count(ex.id)) missing.push_back(ex.id);
    }
    for (const auto& [id, label] : pred_by_id)
        if (!gold_seen.count(id)) extra.push_back(id);
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "prediction/gold id mismatch";
        if (!missing.empty()) msg += "; missing predictions for: " + list_ids(missing);
        if (!extra.empty()) msg += "; extra predictions for: " + list_ids(extra);
        throw std::invalid_argument(msg);
    }

    const std::string& none = schema.no_relation_label();
    EvalReport r;
    r.n_examples = gold.size();
    for (const auto& ex : gold) {
        const std::string& pred = pred_by_id.at(ex.id);
        const bool gold_pos = ex.relation != none;
        const bool pred_pos = pred != none;
        if (gold_pos) ++r.n_gold_positive;
        if (pred_pos) ++r.n_pred_positive;
        if (gold_pos && pred_pos && pred == ex.relation) ++r.n_correct_positive;
    }
    if (r.n_pred_positive > 0)
        r.precision = static_cast<double>(r.n_correct_positive) / static_cast<double>(r.n_pred_positive);
    if (r.n_gold_positive > 0)
        r.recall = static_cast<double>(r.n_correct_positive) / static_cast<double>(r.n_gold_positive);
    if (r.precision + r.recall > 0.0)
        r.micro_f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

}  // namespace dsare
