#include "dsare/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace dsare {

using nlohmann::json;

Datastore build_datastore(const ReModel& model, const std::vector<RelationExample>& examples) {
    Datastore store;
    store.dim = model.repr_size();
    std::unordered_set<std::string> seen;
    store.entries.reserve(examples.size());
    for (const auto& ex : examples) {
        if (!seen.insert(ex.id).second)
            throw std::invalid_argument("duplicate example id '" + ex.id + "' in datastore build");
        store.entries.push_back({encode_example(model, ex).h, ex.relation, ex.id});
    }
    return store;
}

std::vector<Neighbor> knn_query(const Datastore& store, const EntityRepresentation& query,
                                std::size_t k) {
    if (store.entries.empty()) throw std::invalid_argument("knn_query on an empty datastore");
    if (k == 0) throw std::invalid_argument("knn_query k must be >= 1");
    if (query.h.size() != store.dim)
        throw std::invalid_argument("query dimension " + std::to_string(query.h.size()) +
                                    " does not match datastore dimension " +
                                    std::to_string(store.dim));

    struct Scored {
        double d2;
        std::size_t idx;
    };
    std::vector<Scored> scored;
    scored.reserve(store.entries.size());
    for (std::size_t i = 0; i < store.entries.size(); ++i) {
        const auto& e = store.entries[i].repr;
        double d2 = 0.0;
        for (std::size_t j = 0; j < store.dim; ++j) {
            const double diff = e[j] - query.h[j];
            d2 += diff * diff;
        }
        scored.push_back({d2, i});
    }

    const std::size_t take = std::min(k, scored.size());
    auto closer = [&](const Scored& a, const Scored& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        return store.entries[a.idx].example_id < store.entries[b.idx].example_id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), closer);

    std::vector<Neighbor> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto& e = store.entries[scored[i].idx];
        out.push_back({e.example_id, e.relation, std::sqrt(scored[i].d2)});
    }
    return out;
}

void save_datastore(const Datastore& store, const std::filesystem::path& path) {
    json entries = json::array();
    for (const auto& e : store.entries)
        entries.push_back({{"id", e.example_id}, {"relation", e.relation}, {"h", e.repr}});
    json j{{"format", "dsare-datastore"},
           {"version", 1},
           {"dim", store.dim},
           {"count", store.entries.size()},
           {"entries", std::move(entries)}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write datastore file: " + path.string());
    out << j.dump() << '\n';
}

Datastore load_datastore(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open datastore file: " + path.string());
    json j = json::parse(in);
    if (j.value("format", "") != "dsare-datastore")
        throw std::runtime_error("not a datastore file: " + path.string());
    Datastore store;
    store.dim = j.at("dim").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
        DatastoreEntry entry;
        entry.example_id = e.at("id").get<std::string>();
        entry.relation = e.at("relation").get<std::string>();
        entry.repr = e.at("h").get<std::vector<double>>();
        if (entry.repr.size() != store.dim)
            throw std::runtime_error("datastore entry '" + entry.example_id +
                                     "' has wrong dimension");
        store.entries.push_back(std::move(entry));
    }
    if (store.entries.size() != j.at("count").get<std::size_t>())
        throw std::runtime_error("datastore count mismatch: " + path.string());
    return store;
}

}  // namespace dsare
