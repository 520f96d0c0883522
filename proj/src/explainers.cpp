#include "advgnn/explainers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "advgnn/io.hpp"
#include "advgnn/optim.hpp"

namespace advgnn {

std::string to_string(ExplainMethod m) {
    switch (m) {
    case ExplainMethod::vanilla_grad: return "vanilla_grad";
    case ExplainMethod::grad_cam: return "grad_cam";
    case ExplainMethod::gnn_explainer: return "gnn_explainer";
    }
    return "unknown";
}

std::string short_name(ExplainMethod m) {
    switch (m) {
    case ExplainMethod::vanilla_grad: return "VG";
    case ExplainMethod::grad_cam: return "GC";
    case ExplainMethod::gnn_explainer: return "GNNX";
    }
    return "unknown";
}

ExplainMethod explain_method_from_string(const std::string& name) {
    for (auto m : {ExplainMethod::vanilla_grad, ExplainMethod::grad_cam, ExplainMethod::gnn_explainer}) {
        std::string lower = short_name(m);
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (name == to_string(m) || name == short_name(m) || name == lower) return m;
    }
    throw std::invalid_argument("unknown explanation method '" + name +
                                "'; valid methods: VG (vanilla_grad), GC (grad_cam), GNNX (gnn_explainer)");
}

std::string to_string(AttributionKind k) {
    switch (k) {
    case AttributionKind::node: return "node";
    case AttributionKind::node_feature: return "node_feature";
    case AttributionKind::edge: return "edge";
    }
    return "unknown";
}

void ExplainerConfig::validate() const {
    if (gnnx_iterations < 0) throw std::invalid_argument("gnnx_iterations must be >= 0");
    if (!(gnnx_lr > 0.0) || !std::isfinite(gnnx_lr)) throw std::invalid_argument("gnnx_lr must be positive");
    if (!(gnnx_size_reg >= 0.0) || !std::isfinite(gnnx_size_reg))
        throw std::invalid_argument("gnnx_size_reg must be >= 0");
    if (!(gnnx_entropy_reg >= 0.0) || !std::isfinite(gnnx_entropy_reg))
        throw std::invalid_argument("gnnx_entropy_reg must be >= 0");
    if (!std::isfinite(mask_init)) throw std::invalid_argument("mask_init must be finite");
}

nlohmann::ordered_json to_json(const ExplainerConfig& cfg) {
    nlohmann::ordered_json j;
    j["gnnx_iterations"] = cfg.gnnx_iterations;
    j["gnnx_lr"] = cfg.gnnx_lr;
    j["gnnx_size_reg"] = cfg.gnnx_size_reg;
    j["gnnx_entropy_reg"] = cfg.gnnx_entropy_reg;
    j["mask_init"] = cfg.mask_init;
    j["node_reduce"] = cfg.node_reduce == NodeReduce::sum_abs ? "sum_abs" : "l2";
    return j;
}

ExplainerConfig explainer_config_from_json(const nlohmann::json& j, ExplainerConfig base) {
    if (!j.is_object()) throw std::invalid_argument("explainer config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        try {
            if (k == "gnnx_iterations") base.gnnx_iterations = v.get<int>();
            else if (k == "gnnx_lr") base.gnnx_lr = v.get<double>();
            else if (k == "gnnx_size_reg") base.gnnx_size_reg = v.get<double>();
            else if (k == "gnnx_entropy_reg") base.gnnx_entropy_reg = v.get<double>();
            else if (k == "mask_init") base.mask_init = v.get<double>();
            else if (k == "node_reduce") {
                const auto s = v.get<std::string>();
                if (s == "sum_abs") base.node_reduce = NodeReduce::sum_abs;
                else if (s == "l2") base.node_reduce = NodeReduce::l2;
                else throw std::invalid_argument("node_reduce must be sum_abs or l2");
            } else {
                throw std::invalid_argument("unknown explainer key '" + k + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("explainer." + k + ": " + e.what());
        }
    }
    base.validate();
    return base;
}

namespace {

struct ResolvedTarget {
    int cls;
    std::size_t row;  // logit row
    std::optional<std::size_t> node;
};

ResolvedTarget resolve(const ModelParams& params, const Graph& g, const ForwardCache& cache,
                       const ExplainTarget& target) {
    ResolvedTarget r{0, 0, std::nullopt};
    if (params.task == Task::node_classification) {
        if (!target.node) throw ExplainError("node-task explanations need a target node");
        if (*target.node >= g.num_nodes) {
            throw ExplainError("target node " + std::to_string(*target.node) + " out of range for " +
                               std::to_string(g.num_nodes) + " nodes");
        }
        r.node = target.node;
        r.row = *target.node;
    }
    r.cls = target.cls ? *target.cls : predicted_class(cache, r.row);
    if (r.cls < 0 || static_cast<std::size_t>(r.cls) >= params.classes) {
        throw ExplainError("target class " + std::to_string(r.cls) + " out of range");
    }
    return r;
}

Matrix unit_logit(const ForwardCache& cache, const ResolvedTarget& t) {
    Matrix d(cache.logits.rows(), cache.logits.cols());
    d(t.row, static_cast<std::size_t>(t.cls)) = 1.0;
    return d;
}

Attribution blank(const ModelParams& params, ExplainMethod method, AttributionKind kind, const ResolvedTarget& t) {
    Attribution a;
    a.kind = kind;
    a.method = method;
    a.target_class = t.cls;
    a.target_node = t.node;
    a.model_fingerprint = hex64(params.fingerprint());
    return a;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double binary_entropy(double p) {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
    return h;
}

struct LocalEdge {
    std::size_t edge;
    std::size_t a;
    std::size_t b;
};

// Mask optimization over `local` edges of a (sub)graph given by its
// propagation block; the remaining edges of the full list only feel the
// regularizers.
std::vector<double> optimize_edge_mask(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                                       const std::vector<LocalEdge>& local, std::size_t edge_count,
                                       const LossTarget& target, const ExplainerConfig& cfg) {
    std::vector<double> logits(edge_count, cfg.mask_init);
    OptimizerConfig ocfg;
    ocfg.kind = OptimizerKind::adam;
    ocfg.learning_rate = cfg.gnnx_lr;
    Optimizer opt(ocfg);
    const std::size_t n = adjacency.rows();
    Matrix mask(n, n, 1.0);
    std::vector<double> grad(edge_count);
    GradientRequest wants;
    wants.params = false;
    wants.mask = true;

    for (int it = 0; it < cfg.gnnx_iterations; ++it) {
        for (const auto& e : local) {
            const double s = sigmoid(logits[e.edge]);
            mask(e.a, e.b) = s;
            mask(e.b, e.a) = s;
        }
        double objective = 0.0;
        std::vector<double> pred_grad(edge_count, 0.0);
        try {
            const auto cache = forward(params, adjacency, features, {&mask, nullptr});
            objective = loss(cache, target);
            const auto gb = backward(params, cache, target, wants);
            for (const auto& e : local) pred_grad[e.edge] = (*gb.mask)(e.a, e.b) + (*gb.mask)(e.b, e.a);
        } catch (const NumericError& err) {
            throw ExplainError("mask optimization diverged at iteration " + std::to_string(it) + ": " + err.what());
        }
        for (std::size_t e = 0; e < edge_count; ++e) {
            const double m = logits[e];
            const double s = sigmoid(m);
            const double ds = s * (1.0 - s);
            objective += cfg.gnnx_size_reg * s + cfg.gnnx_entropy_reg * binary_entropy(s);
            // d/dm of H(sigmoid(m)) is -m * s * (1 - s).
            grad[e] = pred_grad[e] * ds + cfg.gnnx_size_reg * ds - cfg.gnnx_entropy_reg * m * ds;
        }
        bool finite = std::isfinite(objective);
        for (double v : grad) finite = finite && std::isfinite(v);
        if (!finite) {
            throw ExplainError("mask optimization objective is not finite at iteration " + std::to_string(it));
        }
        opt.step({std::span<double>(logits)}, {std::span<const double>(grad)});
    }
    std::vector<double> scores(edge_count);
    for (std::size_t e = 0; e < edge_count; ++e) scores[e] = sigmoid(logits[e]);
    return scores;
}

LossTarget explain_loss_target(const ModelParams& params, std::size_t n, std::size_t row, int cls) {
    if (params.task == Task::graph_classification) return LossTarget::graph(cls);
    std::vector<int> classes(n, 0);
    classes[row] = cls;
    return LossTarget::node_set(std::move(classes), {row});
}

} // namespace

Attribution vanilla_grad(const ModelParams& params, const Graph& g, const ExplainTarget& target,
                         const ExplainerConfig& cfg) {
    const auto cache = forward(params, g);
    const auto t = resolve(params, g, cache, target);
    GradientRequest wants;
    wants.params = false;
    wants.x0 = true;
    const auto gb = backward_from_logits(params, cache, unit_logit(cache, t), wants);
    Attribution a = blank(params, ExplainMethod::vanilla_grad, AttributionKind::node, t);
    a.feature_scores = *gb.x0;
    for (double& v : a.feature_scores.values()) v = std::abs(v);
    a.scores.assign(g.num_nodes, 0.0);
    for (std::size_t v = 0; v < g.num_nodes; ++v) {
        double s = 0.0;
        for (double x : a.feature_scores.row(v)) s += cfg.node_reduce == NodeReduce::sum_abs ? x : x * x;
        a.scores[v] = cfg.node_reduce == NodeReduce::sum_abs ? s : std::sqrt(s);
    }
    return a;
}

namespace {

std::pair<std::vector<double>, Attribution> grad_cam_impl(const ModelParams& params, const Graph& g,
                                                          const ExplainTarget& target) {
    const auto cache = forward(params, g);
    const auto t = resolve(params, g, cache, target);
    const bool graph_task = params.task == Task::graph_classification;
    GradientRequest wants;
    wants.params = false;
    wants.hidden_layer = graph_task ? 2 : 1;
    const auto gb = backward_from_logits(params, cache, unit_logit(cache, t), wants);
    const Matrix& grad = *gb.hidden;
    const Matrix& last = graph_task ? cache.x2 : cache.x1;
    const std::size_t n = last.rows();
    std::vector<double> alpha(last.cols(), 0.0);
    for (std::size_t v = 0; v < n; ++v)
        for (std::size_t k = 0; k < alpha.size(); ++k) alpha[k] += grad(v, k);
    for (double& x : alpha) x /= static_cast<double>(n);

    Attribution a = blank(params, ExplainMethod::grad_cam, AttributionKind::node, t);
    a.scores.assign(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        double s = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) s += alpha[k] * last(v, k);
        a.scores[v] = std::max(s, 0.0);
    }
    return {std::move(alpha), std::move(a)};
}

} // namespace

Attribution grad_cam(const ModelParams& params, const Graph& g, const ExplainTarget& target) {
    return grad_cam_impl(params, g, target).second;
}

std::vector<double> grad_cam_channel_weights(const ModelParams& params, const Graph& g, const ExplainTarget& target) {
    return grad_cam_impl(params, g, target).first;
}

Attribution gnn_explainer(const ModelParams& params, const Graph& g, const ExplainTarget& target,
                          const ExplainerConfig& cfg) {
    cfg.validate();
    if (params.task == Task::graph_classification) return gnn_explainer_full_graph(params, g, target, cfg);

    const Matrix adj = normalize_adjacency(g);
    const auto cache = forward(params, adj, g.features);
    const auto t = resolve(params, g, cache, target);

    // Closed two-hop ball: everything the target's logit row can see.
    const auto lists = g.adjacency_lists();
    std::vector<char> in_ball(g.num_nodes, 0);
    in_ball[t.row] = 1;
    for (std::size_t u : lists[t.row]) {
        in_ball[u] = 1;
        for (std::size_t w : lists[u]) in_ball[w] = 1;
    }
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> local_index(g.num_nodes, 0);
    for (std::size_t v = 0; v < g.num_nodes; ++v) {
        if (in_ball[v]) {
            local_index[v] = nodes.size();
            nodes.push_back(v);
        }
    }
    const std::size_t m = nodes.size();
    Matrix sub_adj(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) sub_adj(i, j) = adj(nodes[i], nodes[j]);
    const Matrix sub_features = gather_rows(g.features, nodes);
    std::vector<LocalEdge> local;
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        const auto& ed = g.edges[e];
        if (in_ball[ed.u] && in_ball[ed.v]) local.push_back({e, local_index[ed.u], local_index[ed.v]});
    }
    const std::size_t row = local_index[t.row];
    Attribution a = blank(params, ExplainMethod::gnn_explainer, AttributionKind::edge, t);
    a.scores = optimize_edge_mask(params, sub_adj, sub_features, local, g.edges.size(),
                                  explain_loss_target(params, m, row, t.cls), cfg);
    return a;
}

Attribution gnn_explainer_full_graph(const ModelParams& params, const Graph& g, const ExplainTarget& target,
                                     const ExplainerConfig& cfg) {
    cfg.validate();
    const Matrix adj = normalize_adjacency(g);
    const auto cache = forward(params, adj, g.features);
    const auto t = resolve(params, g, cache, target);
    std::vector<LocalEdge> local;
    local.reserve(g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) local.push_back({e, g.edges[e].u, g.edges[e].v});
    Attribution a = blank(params, ExplainMethod::gnn_explainer, AttributionKind::edge, t);
    a.scores = optimize_edge_mask(params, adj, g.features, local, g.edges.size(),
                                  explain_loss_target(params, g.num_nodes, t.row, t.cls), cfg);
    return a;
}

Attribution explain(ExplainMethod method, const ModelParams& params, const Graph& g, const ExplainTarget& target,
                    const ExplainerConfig& cfg) {
    switch (method) {
    case ExplainMethod::vanilla_grad: return vanilla_grad(params, g, target, cfg);
    case ExplainMethod::grad_cam: return grad_cam(params, g, target);
    case ExplainMethod::gnn_explainer: return gnn_explainer(params, g, target, cfg);
    }
    throw std::invalid_argument("unknown explanation method");
}

nlohmann::ordered_json attribution_to_json(const Attribution& a, const Graph& g, const std::string& graph_id) {
    nlohmann::ordered_json j;
    j["graph_id"] = graph_id;
    j["method"] = to_string(a.method);
    j["kind"] = to_string(a.kind);
    nlohmann::ordered_json t;
    t["class"] = a.target_class;
    if (a.target_node) t["node"] = *a.target_node;
    j["target"] = t;
    j["model_fingerprint"] = a.model_fingerprint;
    if (a.kind == AttributionKind::edge) {
        auto edges = nlohmann::ordered_json::array();
        for (const auto& e : g.edges) edges.push_back({e.u, e.v});
        j["edges"] = edges;
    }
    j["scores"] = a.scores;
    if (!a.feature_scores.empty()) {
        auto rows = nlohmann::ordered_json::array();
        for (std::size_t v = 0; v < a.feature_scores.rows(); ++v) {
            auto r = a.feature_scores.row(v);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        j["feature_scores"] = rows;
    }
    return j;
}

std::string importance_color(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    const int r = 255;
    const int gr = static_cast<int>(std::lround(192.0 + 63.0 * t));
    const int b = static_cast<int>(std::lround(203.0 * (1.0 - t)));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gr, b);
    return buf;
}

namespace {

std::vector<double> normalized(const std::vector<double>& s) {
    std::vector<double> out(s.size(), 0.5);
    if (s.empty()) return out;
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (*hi > *lo) {
        for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - *lo) / (*hi - *lo);
    }
    return out;
}

std::string dot_id(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

} // namespace

std::string attribution_to_dot(const Attribution& a, const Graph& g, const std::string& graph_id) {
    std::ostringstream os;
    os << "graph " << dot_id(graph_id) << " {\n";
    os << "  label=" << dot_id(to_string(a.method) + " class " + std::to_string(a.target_class)) << ";\n";
    os << "  node [shape=circle, style=filled, fontsize=10];\n";
    const bool edge_kind = a.kind == AttributionKind::edge;
    const auto t = normalized(a.scores);
    for (std::size_t v = 0; v < g.num_nodes; ++v) {
        os << "  " << v << " [";
        if (!edge_kind && v < t.size()) {
            os << "fillcolor=\"" << importance_color(t[v]) << "\", tooltip=\"" << format_double(a.scores[v]) << "\"";
        } else {
            os << "fillcolor=\"#ffffff\"";
        }
        if (a.target_node && *a.target_node == v) os << ", shape=doublecircle";
        os << "];\n";
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        os << "  " << g.edges[e].u << " -- " << g.edges[e].v;
        if (edge_kind && e < t.size()) {
            os << " [color=\"" << importance_color(t[e]) << "\", penwidth=" << format_double(1.0 + 3.0 * t[e])
               << ", tooltip=\"" << format_double(a.scores[e]) << "\"]";
        }
        os << ";\n";
    }
    os << "}\n";
    return os.str();
}

} // namespace advgnn
