#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "dsare/corpus.hpp"

namespace dsare {

struct ReModelConfig {
    std::size_t hash_dim = 4096;
    std::size_t repr_dim = 64;
    double learning_rate = 0.1;
    std::size_t epochs = 50;
    std::size_t batch_size = 4;
    double l2 = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

// H = [h_sub, h_obj], length 2 * repr_dim.
struct EntityRepresentation {
    std::vector<double> h;
    std::string example_id;
};

struct ScoredPrediction {
    std::string relation;
    std::vector<double> scores;  // softmax over the label order, sums to 1
};

// Linear relation classifier over hashed-feature projections. The projection
// matrices are a pure function of (config.seed, hash_dim, repr_dim), so a
// model file only needs to store the trained weights.
struct ReModel {
    ReModelConfig config;
    std::vector<std::string> labels;  // copy of the schema relation order
    std::vector<double> proj_sub;     // repr_dim x hash_dim, row-major
    std::vector<double> proj_obj;     // repr_dim x hash_dim, row-major
    std::vector<double> weights;      // labels x 2*repr_dim, row-major
    std::vector<double> bias;         // labels

    std::size_t repr_size() const { return 2 * config.repr_dim; }
};

// Subject-side and object-side feature strings. Features shared by both
// sides (between-words, bigrams, distance bucket, direction) appear in both
// sets; entity-specific features (type, words) only in their own set.
struct FeatureSet {
    std::set<std::string> subject;
    std::set<std::string> object;
};

FeatureSet featurize(const MarkedText& marked);

// Untrained model with zero weights and seeded projections.
ReModel make_re_model(const RelationSchema& schema, const ReModelConfig& config);

EntityRepresentation encode_example(const ReModel& model, const RelationExample& ex);

ScoredPrediction predict_from_repr(const ReModel& model, const std::vector<double>& h);
ScoredPrediction predict_relation(const ReModel& model, const RelationExample& ex);

// Multinomial logistic regression over H, trained with seeded mini-batch
// gradient descent. When `dev` is nonempty the returned parameters are the
// ones from the epoch with the best dev micro-F1 (ties keep the earlier
// epoch); otherwise the final epoch wins.
ReModel train_re_model(const std::vector<RelationExample>& train, const RelationSchema& schema,
                       const ReModelConfig& config,
                       const std::vector<RelationExample>& dev = {});

// Mean cross-entropy over the given instances plus (l2/2)*||W||^2. Exposed
// so the analytic gradient below can be checked against finite differences.
double training_loss(const std::vector<double>& weights, const std::vector<double>& bias,
                     const std::vector<std::vector<double>>& reprs,
                     const std::vector<std::size_t>& label_ids, std::size_t n_labels, double l2);

void training_gradient(const std::vector<double>& weights, const std::vector<double>& bias,
                       const std::vector<std::vector<double>>& reprs,
                       const std::vector<std::size_t>& label_ids, std::size_t n_labels, double l2,
                       std::vector<double>& grad_w, std::vector<double>& grad_b);

void save_re_model(const ReModel& model, const std::filesystem::path& path);
ReModel load_re_model(const std::filesystem::path& path);

}  // namespace dsare
