#include "dsare/eval.hpp"

#include <random>

#include "doctest.h"

#include "dsare/util.hpp"
#include "test_support.hpp"

using namespace dsare;
using namespace dsare::testing;

namespace {

std::vector<RelationExample> gold_with(const std::vector<std::string>& relations) {
    std::vector<RelationExample> out;
    for (std::size_t i = 0; i < relations.size(); ++i)
        out.push_back(make_example("g" + std::to_string(i), {"a", "b"}, 0, 0, "PERSON", 1, 1,
                                   "PERSON", relations[i]));
    return out;
}

// Counting oracle written independently of micro_f1_score.
EvalReport counting_oracle(const std::vector<std::pair<std::string, std::string>>& preds,
                           const std::vector<RelationExample>& gold, const std::string& none) {
    EvalReport r;
    r.n_examples = gold.size();
    for (const auto& ex : gold) {
        std::string predicted;
        for (const auto& [id, label] : preds)
            if (id == ex.id) predicted = label;
        if (ex.relation != none) r.n_gold_positive += 1;
        if (predicted != none) {
            r.n_pred_positive += 1;
            if (predicted == ex.relation && ex.relation != none) r.n_correct_positive += 1;
        }
    }
    const double p = r.n_pred_positive
                         ? static_cast<double>(r.n_correct_positive) / r.n_pred_positive
                         : 0.0;
    const double rec = r.n_gold_positive
                           ? static_cast<double>(r.n_correct_positive) / r.n_gold_positive
                           : 0.0;
    r.precision = p;
    r.recall = rec;
    r.micro_f1 = (p + rec) > 0 ? 2 * p * rec / (p + rec) : 0.0;
    return r;
}

}  // namespace

TEST_CASE("perfect predictions score 1.0") {
    const RelationSchema schema({"no_relation", "x", "y"}, "no_relation", {});
    const auto gold = gold_with({"x", "y", "no_relation", "x"});
    std::vector<std::pair<std::string, std::string>> preds;
    for (const auto& ex : gold) preds.emplace_back(ex.id, ex.relation);
    const auto r = micro_f1_score(preds, gold, schema);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.micro_f1 == 1.0);
    CHECK(r.n_gold_positive == 3);
}

TEST_CASE("the two-thirds hand case") {
    // gold: 3 positives + 1 no_relation; predictions: 2 correct positives,
    // 1 positive predicted no_relation, 1 no_relation predicted positive
    const RelationSchema schema({"no_relation", "x", "y", "z"}, "no_relation", {});
    const auto gold = gold_with({"x", "y", "z", "no_relation"});
    const std::vector<std::pair<std::string, std::string>> preds{
        {"g0", "x"}, {"g1", "y"}, {"g2", "no_relation"}, {"g3", "z"}};
    const auto r = micro_f1_score(preds, gold, schema);
    CHECK(std::abs(r.precision - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(r.recall - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(r.micro_f1 - 2.0 / 3.0) <= 1e-12);
}

TEST_CASE("all-no_relation predictions score zero by convention") {
    const RelationSchema schema({"no_relation", "x"}, "no_relation", {});
    const auto gold = gold_with({"x", "x", "no_relation"});
    const std::vector<std::pair<std::string, std::string>> preds{
        {"g0", "no_relation"}, {"g1", "no_relation"}, {"g2", "no_relation"}};
    const auto r = micro_f1_score(preds, gold, schema);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.micro_f1 == 0.0);
}

TEST_CASE("id mismatches are rejected with the offending ids") {
    const RelationSchema schema({"no_relation", "x"}, "no_relation", {});
    const auto gold = gold_with({"x", "x"});
    const std::vector<std::pair<std::string, std::string>> missing{{"g0", "x"}};
    CHECK_THROWS_WITH_AS(micro_f1_score(missing, gold, schema), doctest::Contains("g1"),
                         std::invalid_argument);
    const std::vector<std::pair<std::string, std::string>> extra{
        {"g0", "x"}, {"g1", "x"}, {"ghost", "x"}};
    CHECK_THROWS_WITH_AS(micro_f1_score(extra, gold, schema), doctest::Contains("ghost"),
                         std::invalid_argument);
    const std::vector<std::pair<std::string, std::string>> dup{{"g0", "x"}, {"g0", "x"}};
    CHECK_THROWS_AS(micro_f1_score(dup, gold, schema), std::invalid_argument);
}

TEST_CASE("micro_f1_score matches the counting oracle on random assignments") {
    const std::vector<std::string> labels{"no_relation", "a", "b", "c", "d"};
    const RelationSchema schema(labels, "no_relation", {});
    std::mt19937_64 rng(2024);

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + uniform_below(rng, 30);
        std::vector<std::string> gold_rels;
        for (std::size_t i = 0; i < n; ++i) gold_rels.push_back(labels[uniform_below(rng, 5)]);
        const auto gold = gold_with(gold_rels);
        std::vector<std::pair<std::string, std::string>> preds;
        for (const auto& ex : gold) preds.emplace_back(ex.id, labels[uniform_below(rng, 5)]);

        const auto got = micro_f1_score(preds, gold, schema);
        const auto want = counting_oracle(preds, gold, "no_relation");
        CHECK(got.n_gold_positive == want.n_gold_positive);
        CHECK(got.n_pred_positive == want.n_pred_positive);
        CHECK(got.n_correct_positive == want.n_correct_positive);
        CHECK(std::abs(got.micro_f1 - want.micro_f1) <= 1e-12);
        CHECK(std::abs(got.precision - want.precision) <= 1e-12);
        CHECK(std::abs(got.recall - want.recall) <= 1e-12);
    }
}
