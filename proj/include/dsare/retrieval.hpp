#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dsare/corpus.hpp"
#include "dsare/rebackend.hpp"

namespace dsare {

struct DatastoreEntry {
    std::vector<double> repr;
    std::string relation;
    std::string example_id;
};

// Immutable (representation, label) store over the training set; queried by
// exact Euclidean distance. Desk-scale, so search is a linear scan.
struct Datastore {
    std::size_t dim = 0;
    std::vector<DatastoreEntry> entries;
};

struct Neighbor {
    std::string example_id;
    std::string relation;
    double distance = 0.0;
};

// One entry per example, in input order. Duplicate example ids are an error.
Datastore build_datastore(const ReModel& model, const std::vector<RelationExample>& examples);

// Exact k nearest neighbors, distances non-decreasing, ties broken by
// ascending example id. k is clamped to the store size.
std::vector<Neighbor> knn_query(const Datastore& store, const EntityRepresentation& query,
                                std::size_t k);

void save_datastore(const Datastore& store, const std::filesystem::path& path);
Datastore load_datastore(const std::filesystem::path& path);

}  // namespace dsare
