#include "advgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace advgnn {

MotifSpec MotifSpec::star(std::size_t center_type, std::size_t leaf_type) {
    MotifSpec m;
    m.num_nodes = 4;
    m.edges = {{0, 1}, {0, 2}, {0, 3}};
    m.node_types = {center_type, leaf_type, leaf_type, leaf_type};
    m.attach_node = 0;
    return m;
}

void MotifSpec::validate(std::size_t feature_types) const {
    if (num_nodes == 0) throw GeneratorError("motif must have at least one node");
    if (node_types.size() != num_nodes) throw GeneratorError("motif node_types must list one type per node");
    for (auto t : node_types) {
        if (t >= feature_types) throw GeneratorError("motif node type " + std::to_string(t) + " outside vocabulary");
    }
    if (attach_node >= num_nodes) throw GeneratorError("motif attach_node out of range");
    std::set<Edge> seen;
    std::vector<std::size_t> parent(num_nodes);
    for (std::size_t i = 0; i < num_nodes; ++i) parent[i] = i;
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : edges) {
        if (e.u >= e.v || e.v >= num_nodes) throw GeneratorError("motif edge out of range or not ordered u < v");
        if (!seen.insert(e).second) throw GeneratorError("duplicate motif edge");
        parent[find(e.u)] = find(e.v);
    }
    for (std::size_t i = 1; i < num_nodes; ++i) {
        if (find(i) != find(0)) throw GeneratorError("motif must be connected");
    }
}

void MotifGraphConfig::validate() const {
    if (count < 2) throw GeneratorError("motif_graphs.count must be >= 2");
    if (min_base_nodes < 1 || max_base_nodes < min_base_nodes) {
        throw GeneratorError("motif_graphs.min_base_nodes/max_base_nodes must satisfy 1 <= min <= max");
    }
    if (feature_types < 1) throw GeneratorError("motif_graphs.feature_types must be >= 1");
    if (!(class_balance > 0.0 && class_balance < 1.0)) {
        throw GeneratorError("motif_graphs.class_balance must lie strictly between 0 and 1");
    }
    const auto positives = static_cast<std::size_t>(std::llround(class_balance * static_cast<double>(count)));
    if (positives == 0 || positives >= count) {
        throw GeneratorError("motif_graphs.class_balance leaves one class empty for count " + std::to_string(count));
    }
    motif.validate(feature_types);
    if (motif.num_nodes > min_base_nodes) {
        throw GeneratorError("motif (" + std::to_string(motif.num_nodes) + " nodes) is larger than the smallest base graph (" +
                             std::to_string(min_base_nodes) + " nodes)");
    }
    for (auto t : reserved_types) {
        if (t >= feature_types) throw GeneratorError("motif_graphs.reserved_types entry outside vocabulary");
    }
    if (reserved_types.size() >= feature_types) throw GeneratorError("motif_graphs.reserved_types leaves no base type");
}

nlohmann::ordered_json to_json(const MotifGraphConfig& cfg) {
    nlohmann::ordered_json j;
    j["count"] = cfg.count;
    j["min_base_nodes"] = cfg.min_base_nodes;
    j["max_base_nodes"] = cfg.max_base_nodes;
    j["extra_edges"] = cfg.extra_edges;
    j["feature_types"] = cfg.feature_types;
    j["class_balance"] = cfg.class_balance;
    nlohmann::ordered_json m;
    m["num_nodes"] = cfg.motif.num_nodes;
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : cfg.motif.edges) edges.push_back({e.u, e.v});
    m["edges"] = edges;
    m["node_types"] = cfg.motif.node_types;
    m["attach_node"] = cfg.motif.attach_node;
    j["motif"] = m;
    j["reserved_types"] = cfg.reserved_types;
    return j;
}

namespace {

template <class T>
T get_field(const nlohmann::json& v, const std::string& name) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw GeneratorError(name + " has the wrong type");
    }
}

} // namespace

MotifGraphConfig motif_graph_config_from_json(const nlohmann::json& j, MotifGraphConfig base) {
    if (!j.is_object()) throw GeneratorError("motif_graphs config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto name = "motif_graphs." + k;
        const auto& v = it.value();
        if (k == "count") base.count = get_field<std::size_t>(v, name);
        else if (k == "min_base_nodes") base.min_base_nodes = get_field<std::size_t>(v, name);
        else if (k == "max_base_nodes") base.max_base_nodes = get_field<std::size_t>(v, name);
        else if (k == "extra_edges") base.extra_edges = get_field<std::size_t>(v, name);
        else if (k == "feature_types") base.feature_types = get_field<std::size_t>(v, name);
        else if (k == "class_balance") base.class_balance = get_field<double>(v, name);
        else if (k == "reserved_types") base.reserved_types = get_field<std::vector<std::size_t>>(v, name);
        else if (k == "motif") {
            MotifSpec m;
            m.num_nodes = get_field<std::size_t>(v.at("num_nodes"), name + ".num_nodes");
            for (const auto& e : v.at("edges")) {
                m.edges.push_back(Edge::make(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()));
            }
            m.node_types = get_field<std::vector<std::size_t>>(v.at("node_types"), name + ".node_types");
            if (v.contains("attach_node")) m.attach_node = get_field<std::size_t>(v["attach_node"], name + ".attach_node");
            base.motif = m;
        } else {
            throw GeneratorError("unknown key " + name);
        }
    }
    base.validate();
    return base;
}

namespace {

std::vector<std::size_t> node_types(const Graph& g) {
    std::vector<std::size_t> t(g.num_nodes, 0);
    for (std::size_t v = 0; v < g.num_nodes; ++v) {
        auto r = g.features.row(v);
        t[v] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return t;
}

bool extend(const MotifSpec& m, const std::vector<std::vector<char>>& adj, const std::vector<std::size_t>& types,
            std::vector<std::size_t>& assign, std::vector<char>& used, std::size_t next) {
    if (next == m.num_nodes) return true;
    for (std::size_t v = 0; v < types.size(); ++v) {
        if (used[v] || types[v] != m.node_types[next]) continue;
        bool ok = true;
        for (const auto& e : m.edges) {
            // Only edges whose endpoints are both assigned once `next` is placed.
            const std::size_t a = e.u, b = e.v;
            if (std::max(a, b) != next) continue;
            const std::size_t other = a == next ? b : a;
            if (!adj[assign[other]][v]) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        assign[next] = v;
        used[v] = 1;
        if (extend(m, adj, types, assign, used, next + 1)) return true;
        used[v] = 0;
    }
    return false;
}

} // namespace

bool contains_motif(const Graph& g, const MotifSpec& motif) {
    if (motif.num_nodes > g.num_nodes) return false;
    std::vector<std::vector<char>> adj(g.num_nodes, std::vector<char>(g.num_nodes, 0));
    for (const auto& e : g.edges) adj[e.u][e.v] = adj[e.v][e.u] = 1;
    const auto types = node_types(g);
    std::vector<std::size_t> assign(motif.num_nodes, 0);
    std::vector<char> used(g.num_nodes, 0);
    return extend(motif, adj, types, assign, used, 0);
}

namespace {

Graph random_base(const MotifGraphConfig& cfg, const std::vector<std::size_t>& base_types, Rng& rng) {
    Graph g;
    const std::size_t n = cfg.min_base_nodes + rng.below(cfg.max_base_nodes - cfg.min_base_nodes + 1);
    g.num_nodes = n;
    std::set<Edge> edges;
    for (std::size_t v = 1; v < n; ++v) edges.insert(Edge::make(rng.below(v), v));
    const std::size_t max_edges = n * (n - 1) / 2;
    const std::size_t target = std::min(max_edges, edges.size() + cfg.extra_edges);
    while (edges.size() < target) {
        const std::size_t a = rng.below(n);
        const std::size_t b = rng.below(n);
        if (a != b) edges.insert(Edge::make(a, b));
    }
    g.edges.assign(edges.begin(), edges.end());
    g.features = Matrix(n, cfg.feature_types);
    for (std::size_t v = 0; v < n; ++v) g.features(v, base_types[rng.below(base_types.size())]) = 1.0;
    return g;
}

void plant(Graph& g, const MotifSpec& m, Rng& rng) {
    const std::size_t offset = g.num_nodes;
    const std::size_t anchor = rng.below(offset);
    Matrix features(offset + m.num_nodes, g.features.cols());
    for (std::size_t v = 0; v < offset; ++v)
        for (std::size_t k = 0; k < features.cols(); ++k) features(v, k) = g.features(v, k);
    for (std::size_t i = 0; i < m.num_nodes; ++i) {
        features(offset + i, m.node_types[i]) = 1.0;
        g.ground_truth.nodes.push_back(offset + i);
    }
    for (const auto& e : m.edges) {
        const Edge pe{offset + e.u, offset + e.v};
        g.edges.push_back(pe);
        g.ground_truth.edges.push_back(pe);
    }
    g.edges.push_back(Edge::make(anchor, offset + m.attach_node));
    std::sort(g.edges.begin(), g.edges.end());
    g.num_nodes = offset + m.num_nodes;
    g.features = std::move(features);
}

} // namespace

Dataset gen_motif_graphs(const MotifGraphConfig& cfg, const Rng& rng) {
    cfg.validate();
    std::vector<std::size_t> base_types;
    for (std::size_t t = 0; t < cfg.feature_types; ++t) {
        if (std::find(cfg.reserved_types.begin(), cfg.reserved_types.end(), t) == cfg.reserved_types.end()) {
            base_types.push_back(t);
        }
    }
    const auto positives = static_cast<std::size_t>(std::llround(cfg.class_balance * static_cast<double>(cfg.count)));
    std::vector<int> labels(cfg.count, 0);
    for (std::size_t i = 0; i < positives; ++i) labels[i] = 1;
    Rng label_rng = rng.child(0);
    label_rng.shuffle(labels);

    Dataset d;
    d.task = Task::graph_classification;
    d.num_classes = 2;
    d.graphs.reserve(cfg.count);
    for (std::size_t i = 0; i < cfg.count; ++i) {
        Rng grng = rng.child(i + 1);
        Graph g;
        bool accepted = false;
        for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
            g = random_base(cfg, base_types, grng);
            if (contains_motif(g, cfg.motif)) continue;
            if (labels[i] == 1) plant(g, cfg.motif, grng);
            accepted = true;
        }
        if (!accepted) {
            throw GeneratorError("could not draw a motif-free base graph; reserve a motif type via reserved_types");
        }
        g.labels = {labels[i]};
        if ((labels[i] == 1) != contains_motif(g, cfg.motif)) {
            throw std::logic_error("generated graph " + std::to_string(i) + " violates the motif/label rule");
        }
        d.graphs.push_back(std::move(g));
    }
    nlohmann::ordered_json gen;
    gen["kind"] = "motif_graphs";
    gen["seed"] = rng.seed();
    gen["config"] = to_json(cfg);
    d.generator = gen;
    d.validate();
    return d;
}

void BaShapesConfig::validate() const {
    if (base_nodes < 20) throw GeneratorError("ba_shapes.base_nodes must be >= 20");
    if (motif_count < 1) throw GeneratorError("ba_shapes.motif_count must be >= 1");
    if (attach_edges < 1 || attach_edges >= base_nodes) {
        throw GeneratorError("ba_shapes.attach_edges must lie in [1, base_nodes)");
    }
    if (degree_buckets < 2) throw GeneratorError("ba_shapes.degree_buckets must be >= 2");
}

nlohmann::ordered_json to_json(const BaShapesConfig& cfg) {
    nlohmann::ordered_json j;
    j["base_nodes"] = cfg.base_nodes;
    j["motif_count"] = cfg.motif_count;
    j["attach_edges"] = cfg.attach_edges;
    j["degree_buckets"] = cfg.degree_buckets;
    return j;
}

BaShapesConfig ba_shapes_config_from_json(const nlohmann::json& j, BaShapesConfig base) {
    if (!j.is_object()) throw GeneratorError("ba_shapes config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto name = "ba_shapes." + k;
        if (k == "base_nodes") base.base_nodes = get_field<std::size_t>(it.value(), name);
        else if (k == "motif_count") base.motif_count = get_field<std::size_t>(it.value(), name);
        else if (k == "attach_edges") base.attach_edges = get_field<std::size_t>(it.value(), name);
        else if (k == "degree_buckets") base.degree_buckets = get_field<std::size_t>(it.value(), name);
        else throw GeneratorError("unknown key " + name);
    }
    base.validate();
    return base;
}

Dataset gen_ba_shapes(const BaShapesConfig& cfg, const Rng& rng) {
    cfg.validate();
    Rng r = rng.child(0);
    const std::size_t m = cfg.attach_edges;
    const std::size_t n = cfg.base_nodes + 5 * cfg.motif_count;
    std::set<Edge> edges;
    // Endpoint multiset: drawing from it samples nodes proportionally to degree.
    std::vector<std::size_t> endpoints;
    for (std::size_t a = 0; a <= m; ++a)
        for (std::size_t b = a + 1; b <= m; ++b) {
            edges.insert({a, b});
            endpoints.push_back(a);
            endpoints.push_back(b);
        }
    for (std::size_t v = m + 1; v < cfg.base_nodes; ++v) {
        std::set<std::size_t> targets;
        while (targets.size() < m) targets.insert(endpoints[r.below(endpoints.size())]);
        for (std::size_t t : targets) {
            edges.insert(Edge::make(t, v));
            endpoints.push_back(t);
            endpoints.push_back(v);
        }
    }

    Graph g;
    g.num_nodes = n;
    g.labels.assign(n, 0);
    g.node_ground_truth.assign(n, {});
    for (std::size_t h = 0; h < cfg.motif_count; ++h) {
        const std::size_t top = cfg.base_nodes + 5 * h;
        const std::size_t mid1 = top + 1, mid2 = top + 2, bot1 = top + 3, bot2 = top + 4;
        const std::vector<Edge> house{{top, mid1}, {top, mid2}, {mid1, mid2}, {mid1, bot1}, {mid2, bot2}, {bot1, bot2}};
        for (const auto& e : house) edges.insert(e);
        edges.insert(Edge::make(r.below(cfg.base_nodes), bot1));
        g.labels[top] = house_top;
        g.labels[mid1] = g.labels[mid2] = house_middle;
        g.labels[bot1] = g.labels[bot2] = house_bottom;
        GroundTruth gt{{top, mid1, mid2, bot1, bot2}, house};
        std::sort(gt.edges.begin(), gt.edges.end());
        for (std::size_t v = top; v <= bot2; ++v) g.node_ground_truth[v] = gt;
    }
    g.edges.assign(edges.begin(), edges.end());

    std::vector<std::size_t> degree(n, 0);
    for (const auto& e : g.edges) {
        ++degree[e.u];
        ++degree[e.v];
    }
    g.features = Matrix(n, cfg.degree_buckets);
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t bucket = std::min(degree[v], cfg.degree_buckets) - (degree[v] > 0 ? 1 : 0);
        g.features(v, std::min(bucket, cfg.degree_buckets - 1)) = 1.0;
    }

    Dataset d;
    d.task = Task::node_classification;
    d.num_classes = 4;
    d.graphs.push_back(std::move(g));
    nlohmann::ordered_json gen;
    gen["kind"] = "ba_shapes";
    gen["seed"] = rng.seed();
    gen["config"] = to_json(cfg);
    d.generator = gen;
    d.validate();
    return d;
}

} // namespace advgnn
