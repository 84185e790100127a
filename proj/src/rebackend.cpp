#include "dsare/rebackend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "json.hpp"

#include "dsare/eval.hpp"
#include "dsare/util.hpp"

namespace dsare {

using nlohmann::json;

void ReModelConfig::validate() const {
    if (repr_dim == 0) throw std::invalid_argument("repr_dim must be >= 1");
    if (hash_dim < repr_dim) throw std::invalid_argument("hash_dim must be >= repr_dim");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
    if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
}

namespace {

std::string dist_bucket(std::size_t n_between) {
    if (n_between <= 2) return std::to_string(n_between);
    if (n_between <= 5) return "3-5";
    if (n_between <= 10) return "6-10";
    return "11+";
}

std::vector<std::string> block_words(const MarkedText& m, std::size_t anchor, std::size_t close) {
    std::vector<std::string> out;
    for (std::size_t i = anchor + 4; i < close; ++i) out.push_back(to_lower(m.tokens[i]));
    return out;
}

}  // namespace

FeatureSet featurize(const MarkedText& marked) {
    const bool subj_first = marked.subj_anchor < marked.obj_anchor;
    const std::size_t first_close = subj_first ? marked.subj_close : marked.obj_close;
    const std::size_t second_anchor = subj_first ? marked.obj_anchor : marked.subj_anchor;

    const std::string subj_type = marked.tokens[marked.subj_anchor + 2];
    const std::string obj_type = marked.tokens[marked.obj_anchor + 2];
    const auto subj_words = block_words(marked, marked.subj_anchor, marked.subj_close);
    const auto obj_words = block_words(marked, marked.obj_anchor, marked.obj_close);

    std::vector<std::string> between;
    for (std::size_t i = first_close + 1; i < second_anchor; ++i)
        between.push_back(to_lower(marked.tokens[i]));

    std::set<std::string> shared;
    for (const auto& w : between) shared.insert("bw=" + w);
    if (!between.empty()) {
        // Bigrams over the gap with ^/$ glued to the outermost words; a
        // single-word gap degenerates to the one padded token.
        std::vector<std::string> padded = between;
        padded.front() = "^" + padded.front();
        padded.back() += "$";
        if (padded.size() == 1) {
            shared.insert("bb=" + padded.front());
        } else {
            for (std::size_t i = 0; i + 1 < padded.size(); ++i)
                shared.insert("bb=" + padded[i] + " " + padded[i + 1]);
        }
    }
    shared.insert("dist=" + dist_bucket(between.size()));
    shared.insert(std::string("dir=") + (subj_first ? "subj_first" : "obj_first"));

    FeatureSet fs;
    fs.subject = shared;
    fs.object = std::move(shared);
    fs.subject.insert("st=" + subj_type);
    for (const auto& w : subj_words) fs.subject.insert("sw=" + w);
    fs.object.insert("ot=" + obj_type);
    for (const auto& w : obj_words) fs.object.insert("ow=" + w);
    return fs;
}

namespace {

// Sign-hashed bag of features over hash_dim buckets, as (bucket, value)
// pairs in ascending bucket order so downstream sums are order-stable.
std::map<std::size_t, double> hash_features(const std::set<std::string>& features,
                                            std::size_t hash_dim) {
    std::map<std::size_t, double> x;
    for (const auto& f : features) {
        const std::uint64_t h = fnv1a64(f);
        const std::size_t bucket = static_cast<std::size_t>(h % hash_dim);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        x[bucket] += sign;
    }
    return x;
}

// h = P * x over the sparse buckets, then L2-normalized (zero stays zero).
void project_into(const std::vector<double>& proj, std::size_t repr_dim, std::size_t hash_dim,
                  const std::map<std::size_t, double>& x, double* out) {
    for (std::size_t r = 0; r < repr_dim; ++r) {
        double acc = 0.0;
        const double* row = proj.data() + r * hash_dim;
        for (const auto& [bucket, value] : x) acc += row[bucket] * value;
        out[r] = acc;
    }
    double norm2 = 0.0;
    for (std::size_t r = 0; r < repr_dim; ++r) norm2 += out[r] * out[r];
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t r = 0; r < repr_dim; ++r) out[r] *= inv;
    }
}

std::vector<double> make_projection(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
    std::vector<double> p(rows * cols);
    for (double& v : p) v = (rng() & 1) ? 1.0 : -1.0;
    return p;
}

void softmax_into(std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

std::vector<double> logits_for(const std::vector<double>& weights, const std::vector<double>& bias,
                               const std::vector<double>& h, std::size_t n_labels) {
    const std::size_t dim = h.size();
    std::vector<double> z(n_labels);
    for (std::size_t c = 0; c < n_labels; ++c) {
        double acc = bias[c];
        const double* row = weights.data() + c * dim;
        for (std::size_t j = 0; j < dim; ++j) acc += row[j] * h[j];
        z[c] = acc;
    }
    return z;
}

}  // namespace

ReModel make_re_model(const RelationSchema& schema, const ReModelConfig& config) {
    config.validate();
    if (schema.size() == 0) throw std::invalid_argument("schema has no relations");
    ReModel m;
    m.config = config;
    m.labels = schema.relations();
    std::mt19937_64 rng(derive_seed(config.seed, "projection"));
    m.proj_sub = make_projection(rng, config.repr_dim, config.hash_dim);
    m.proj_obj = make_projection(rng, config.repr_dim, config.hash_dim);
    m.weights.assign(m.labels.size() * m.repr_size(), 0.0);
    m.bias.assign(m.labels.size(), 0.0);
    return m;
}

EntityRepresentation encode_example(const ReModel& model, const RelationExample& ex) {
    const MarkedText marked = mark_entities(ex);
    const FeatureSet fs = featurize(marked);
    const std::size_t d = model.config.repr_dim;

    EntityRepresentation rep;
    rep.example_id = ex.id;
    rep.h.assign(2 * d, 0.0);
    const auto x_sub = hash_features(fs.subject, model.config.hash_dim);
    const auto x_obj = hash_features(fs.object, model.config.hash_dim);
    project_into(model.proj_sub, d, model.config.hash_dim, x_sub, rep.h.data());
    project_into(model.proj_obj, d, model.config.hash_dim, x_obj, rep.h.data() + d);
    return rep;
}

ScoredPrediction predict_from_repr(const ReModel& model, const std::vector<double>& h) {
    if (h.size() != model.repr_size())
        throw std::invalid_argument("representation size mismatch: got " +
                                    std::to_string(h.size()) + ", expected " +
                                    std::to_string(model.repr_size()));
    std::vector<double> scores = logits_for(model.weights, model.bias, h, model.labels.size());
    softmax_into(scores);
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;  // ties keep the lower label index
    return ScoredPrediction{model.labels[best], std::move(scores)};
}

ScoredPrediction predict_relation(const ReModel& model, const RelationExample& ex) {
    return predict_from_repr(model, encode_example(model, ex).h);
}

double training_loss(const std::vector<double>& weights, const std::vector<double>& bias,
                     const std::vector<std::vector<double>>& reprs,
                     const std::vector<std::size_t>& label_ids, std::size_t n_labels, double l2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < reprs.size(); ++i) {
        std::vector<double> z = logits_for(weights, bias, reprs[i], n_labels);
        const double mx = *std::max_element(z.begin(), z.end());
        double lse = 0.0;
        for (double v : z) lse += std::exp(v - mx);
        lse = mx + std::log(lse);
        loss += lse - z[label_ids[i]];
    }
    loss /= static_cast<double>(reprs.size());
    double reg = 0.0;
    for (double w : weights) reg += w * w;
    return loss + 0.5 * l2 * reg;
}

void training_gradient(const std::vector<double>& weights, const std::vector<double>& bias,
                       const std::vector<std::vector<double>>& reprs,
                       const std::vector<std::size_t>& label_ids, std::size_t n_labels, double l2,
                       std::vector<double>& grad_w, std::vector<double>& grad_b) {
    const std::size_t dim = reprs.empty() ? 0 : reprs[0].size();
    grad_w.assign(weights.size(), 0.0);
    grad_b.assign(bias.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(reprs.size());
    for (std::size_t i = 0; i < reprs.size(); ++i) {
        std::vector<double> p = logits_for(weights, bias, reprs[i], n_labels);
        softmax_into(p);
        p[label_ids[i]] -= 1.0;
        for (std::size_t c = 0; c < n_labels; ++c) {
            const double g = p[c] * inv_n;
            if (g == 0.0) continue;
            double* row = grad_w.data() + c * dim;
            const double* h = reprs[i].data();
            for (std::size_t j = 0; j < dim; ++j) row[j] += g * h[j];
            grad_b[c] += g;
        }
    }
    for (std::size_t j = 0; j < weights.size(); ++j) grad_w[j] += l2 * weights[j];
}

ReModel train_re_model(const std::vector<RelationExample>& train, const RelationSchema& schema,
                       const ReModelConfig& config, const std::vector<RelationExample>& dev) {
    config.validate();
    if (train.empty()) throw std::invalid_argument("empty training set");

    ReModel model = make_re_model(schema, config);
    const std::size_t n_labels = model.labels.size();

    std::vector<std::vector<double>> reprs;
    std::vector<std::size_t> labels;
    reprs.reserve(train.size());
    labels.reserve(train.size());
    for (const auto& ex : train) {
        auto idx = schema.relation_index(ex.relation);
        if (!idx) throw std::invalid_argument("unknown relation label '" + ex.relation + "'");
        reprs.push_back(encode_example(model, ex).h);
        labels.push_back(*idx);
    }

    std::vector<std::vector<double>> dev_reprs;
    for (const auto& ex : dev) dev_reprs.push_back(encode_example(model, ex).h);

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, "shuffle"));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_f1 = -1.0;
    std::vector<double> best_w, best_b;

    std::vector<double> grad_w, grad_b;
    std::vector<std::vector<double>> batch_h;
    std::vector<std::size_t> batch_y;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_in_place(order, shuffle_rng);
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            batch_h.clear();
            batch_y.clear();
            for (std::size_t i = begin; i < end; ++i) {
                batch_h.push_back(reprs[order[i]]);
                batch_y.push_back(labels[order[i]]);
            }
            training_gradient(model.weights, model.bias, batch_h, batch_y, n_labels, config.l2,
                              grad_w, grad_b);
            for (std::size_t j = 0; j < model.weights.size(); ++j)
                model.weights[j] -= config.learning_rate * grad_w[j];
            for (std::size_t j = 0; j < model.bias.size(); ++j)
                model.bias[j] -= config.learning_rate * grad_b[j];
        }

        if (!dev.empty()) {
            std::vector<std::pair<std::string, std::string>> preds;
            preds.reserve(dev.size());
            for (std::size_t i = 0; i < dev.size(); ++i)
                preds.emplace_back(dev[i].id, predict_from_repr(model, dev_reprs[i]).relation);
            const double f1 = micro_f1_score(preds, dev, schema).micro_f1;
            if (f1 > best_f1) {
                best_f1 = f1;
                best_w = model.weights;
                best_b = model.bias;
            }
        }
    }

    if (!dev.empty()) {
        model.weights = std::move(best_w);
        model.bias = std::move(best_b);
    }
    return model;
}

void save_re_model(const ReModel& model, const std::filesystem::path& path) {
    json j{{"format", "dsare-re-model"},
           {"version", 1},
           {"config",
            {{"hash_dim", model.config.hash_dim},
             {"repr_dim", model.config.repr_dim},
             {"learning_rate", model.config.learning_rate},
             {"epochs", model.config.epochs},
             {"batch_size", model.config.batch_size},
             {"l2", model.config.l2},
             {"seed", model.config.seed}}},
           {"labels", model.labels},
           {"weights", model.weights},
           {"bias", model.bias}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path.string());
    out << j.dump(2) << '\n';
}

ReModel load_re_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    json j = json::parse(in);
    if (j.value("format", "") != "dsare-re-model")
        throw std::runtime_error("not a model file: " + path.string());

    ReModelConfig cfg;
    const json& c = j.at("config");
    cfg.hash_dim = c.at("hash_dim").get<std::size_t>();
    cfg.repr_dim = c.at("repr_dim").get<std::size_t>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.epochs = c.at("epochs").get<std::size_t>();
    cfg.batch_size = c.at("batch_size").get<std::size_t>();
    cfg.l2 = c.at("l2").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.validate();

    ReModel m;
    m.config = cfg;
    m.labels = j.at("labels").get<std::vector<std::string>>();
    std::mt19937_64 rng(derive_seed(cfg.seed, "projection"));
    m.proj_sub = make_projection(rng, cfg.repr_dim, cfg.hash_dim);
    m.proj_obj = make_projection(rng, cfg.repr_dim, cfg.hash_dim);
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<std::vector<double>>();
    if (m.weights.size() != m.labels.size() * m.repr_size() || m.bias.size() != m.labels.size())
        throw std::runtime_error("model file has inconsistent parameter shapes: " + path.string());
    return m;
}

}  // namespace dsare
