#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dsare/corpus.hpp"

namespace dsare {

// Micro-averaged scores. The no-relation label earns no positive-class
// credit: precision counts over non-no-relation predictions, recall over
// non-no-relation gold labels. Zero denominators score 0.
struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double micro_f1 = 0.0;
    std::size_t n_examples = 0;
    std::size_t n_gold_positive = 0;
    std::size_t n_pred_positive = 0;
    std::size_t n_correct_positive = 0;

    nlohmann::json to_json() const;
};

// `predictions` pairs are (example_id, final label). The id sets of
// predictions and gold must match exactly; mismatches raise an error that
// lists missing/extra ids.
EvalReport micro_f1_score(const std::vector<std::pair<std::string, std::string>>& predictions,
                          const std::vector<RelationExample>& gold, const RelationSchema& schema);

}  // namespace dsare
