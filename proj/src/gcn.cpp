#include "advgnn/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "advgnn/io.hpp"

namespace advgnn {

ModelParams ModelParams::init(Task task, std::size_t in_dim, std::size_t hidden, std::size_t classes, Rng& rng) {
    if (in_dim == 0 || hidden == 0 || classes == 0) {
        throw ModelError("model dimensions must be positive");
    }
    ModelParams p;
    p.task = task;
    p.in_dim = in_dim;
    p.hidden = hidden;
    p.classes = classes;
    p.w1 = glorot_init(in_dim, hidden, rng);
    if (task == Task::graph_classification) {
        p.w2 = glorot_init(hidden, hidden, rng);
        p.head_w = glorot_init(hidden, classes, rng);
        p.head_b = Matrix(1, classes);
    } else {
        p.w2 = glorot_init(hidden, classes, rng);
    }
    return p;
}

void ModelParams::validate() const {
    auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
        if (m.rows() != r || m.cols() != c) {
            throw ModelError(std::string(name) + " has shape " + m.shape_string() + ", expected " +
                             std::to_string(r) + "x" + std::to_string(c));
        }
        if (!all_finite(m)) throw ModelError(std::string(name) + " has non-finite entries");
    };
    expect(w1, in_dim, hidden, "w1");
    if (task == Task::graph_classification) {
        expect(w2, hidden, hidden, "w2");
        expect(head_w, hidden, classes, "head_w");
        expect(head_b, 1, classes, "head_b");
    } else {
        expect(w2, hidden, classes, "w2");
        if (!head_w.empty() || !head_b.empty()) throw ModelError("node-task model must not carry a head");
    }
}

std::vector<std::span<double>> ModelParams::blocks() {
    std::vector<std::span<double>> out{w1.values(), w2.values()};
    if (task == Task::graph_classification) {
        out.push_back(head_w.values());
        out.push_back(head_b.values());
    }
    return out;
}

std::vector<std::span<const double>> ModelParams::blocks() const {
    std::vector<std::span<const double>> out{w1.values(), w2.values()};
    if (task == Task::graph_classification) {
        out.push_back(head_w.values());
        out.push_back(head_b.values());
    }
    return out;
}

std::uint64_t ModelParams::fingerprint() const {
    std::uint64_t dims[4] = {task == Task::graph_classification ? 0u : 1u, in_dim, hidden, classes};
    std::uint64_t h = fnv1a(dims, sizeof(dims));
    for (auto block : blocks()) {
        h = fnv1a(block.data(), block.size() * sizeof(double), h);
    }
    return h;
}

std::vector<std::span<const double>> GradientBundle::param_blocks() const {
    std::vector<std::span<const double>> out{w1.values(), w2.values()};
    if (!head_w.empty()) {
        out.push_back(head_w.values());
        out.push_back(head_b.values());
    }
    return out;
}

ModelParams randomize(const ModelParams& params, Rng& rng) {
    params.validate();
    ModelParams out = ModelParams::init(params.task, params.in_dim, params.hidden, params.classes, rng);
    return out;
}

namespace {

Matrix relu(const Matrix& z) {
    Matrix out = z;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

/// Zeroes gradient entries where the pre-activation is not positive
/// (subgradient 0 at the kink).
Matrix relu_backward(const Matrix& grad, const Matrix& z) {
    Matrix out = grad;
    auto zv = z.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) {
        if (!(zv[i] > 0.0)) ov[i] = 0.0;
    }
    return out;
}

ConvState conv_forward(const Matrix& p, Matrix input, const Matrix& w) {
    ConvState s;
    s.aggregate_first = input.cols() <= w.cols();
    if (s.aggregate_first) {
        s.inner = matmul(p, input);
        s.z = matmul(s.inner, w);
    } else {
        s.inner = matmul(input, w);
        s.z = matmul(p, s.inner);
    }
    s.input = std::move(input);
    return s;
}

struct ConvGrads {
    Matrix dw;
    Matrix dinput;
    Matrix dp;
};

ConvGrads conv_backward(const Matrix& p, const Matrix& w, const ConvState& s, const Matrix& dz, bool want_dw,
                        bool want_dinput, bool want_dp) {
    ConvGrads g;
    if (s.aggregate_first) {
        if (want_dw) g.dw = matmul_at_b(s.inner, dz);
        if (want_dinput || want_dp) {
            const Matrix dinner = matmul_a_bt(dz, w);
            if (want_dinput) g.dinput = matmul_at_b(p, dinner);
            if (want_dp) g.dp = matmul_a_bt(dinner, s.input);
        }
    } else {
        if (want_dw || want_dinput) {
            const Matrix dinner = matmul_at_b(p, dz);
            if (want_dw) g.dw = matmul_at_b(s.input, dinner);
            if (want_dinput) g.dinput = matmul_a_bt(dinner, w);
        }
        if (want_dp) g.dp = matmul_a_bt(dz, s.inner);
    }
    return g;
}

void check_mask(const Matrix& mask, std::size_t n) {
    if (mask.rows() != n || mask.cols() != n) {
        throw ShapeError("mask shape " + mask.shape_string() + " does not match " + std::to_string(n) + " nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double m = mask(i, j);
            if (!(m >= 0.0 && m <= 1.0)) throw ModelError("mask entries must lie in [0, 1]");
            if (m != mask(j, i)) throw ModelError("mask must be symmetric");
        }
    }
}

void check_class(int cls, std::size_t classes) {
    if (cls < 0 || static_cast<std::size_t>(cls) >= classes) {
        throw ModelError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(classes) + ")");
    }
}

double row_cross_entropy(std::span<const double> logits, int cls) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    return mx + std::log(sum) - logits[static_cast<std::size_t>(cls)];
}

} // namespace

std::vector<double> softmax(std::span<const double> logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

ForwardCache forward(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                     const ForwardOptions& opts) {
    const std::size_t n = features.rows();
    if (adjacency.rows() != n || adjacency.cols() != n) {
        throw ShapeError("adjacency " + adjacency.shape_string() + " does not match " + std::to_string(n) + " nodes");
    }
    if (features.cols() != params.in_dim) {
        throw ShapeError("features " + features.shape_string() + " do not match model input width " +
                         std::to_string(params.in_dim));
    }
    if (n == 0) throw ShapeError("forward: graph has no nodes");
    if (opts.inject) {
        if (opts.inject->layer != 0 && opts.inject->layer != 1) {
            throw ModelError("injection layer " + std::to_string(opts.inject->layer) + " outside {0, 1}");
        }
    }

    ForwardCache c;
    c.task = params.task;
    if (opts.mask) {
        check_mask(*opts.mask, n);
        c.masked = true;
        c.base_adjacency = adjacency;
        c.propagation = hadamard(adjacency, *opts.mask);
    } else {
        c.propagation = adjacency;
    }

    Matrix x0 = features;
    if (opts.inject && opts.inject->layer == 0) {
        require_same_shape(x0, opts.inject->delta, "injection at X0");
        x0 = add(x0, opts.inject->delta);
    }
    c.conv1 = conv_forward(c.propagation, std::move(x0), params.w1);
    c.x1 = relu(c.conv1.z);
    if (opts.inject && opts.inject->layer == 1) {
        require_same_shape(c.x1, opts.inject->delta, "injection at X1");
        c.x1 = add(c.x1, opts.inject->delta);
    }
    c.conv2 = conv_forward(c.propagation, c.x1, params.w2);
    if (params.task == Task::graph_classification) {
        c.x2 = relu(c.conv2.z);
        c.readout = column_mean(c.x2);
        c.logits = add(matmul(c.readout, params.head_w), params.head_b);
    } else {
        c.logits = c.conv2.z;
    }
    return c;
}

ForwardCache forward(const ModelParams& params, const Graph& g, const ForwardOptions& opts) {
    return forward(params, normalize_adjacency(g), g.features, opts);
}

namespace {

void check_target(const ForwardCache& cache, const LossTarget& target) {
    const std::size_t classes = cache.logits.cols();
    if (cache.task == Task::graph_classification) {
        if (target.classes.size() != 1) throw ModelError("graph loss needs exactly one target class");
        check_class(target.classes.front(), classes);
        return;
    }
    if (target.classes.size() != cache.logits.rows()) {
        throw ModelError("node loss needs one class per node");
    }
    if (target.nodes.empty()) throw ModelError("node loss needs a non-empty node set");
    for (auto v : target.nodes) {
        if (v >= cache.logits.rows()) throw ModelError("loss node " + std::to_string(v) + " out of range");
        check_class(target.classes[v], classes);
    }
}

} // namespace

double loss(const ForwardCache& cache, const LossTarget& target) {
    check_target(cache, target);
    if (cache.task == Task::graph_classification) {
        return row_cross_entropy(cache.logits.row(0), target.classes.front());
    }
    double total = 0.0;
    for (auto v : target.nodes) total += row_cross_entropy(cache.logits.row(v), target.classes[v]);
    return total / static_cast<double>(target.nodes.size());
}

Matrix loss_logit_gradient(const ForwardCache& cache, const LossTarget& target) {
    check_target(cache, target);
    Matrix d(cache.logits.rows(), cache.logits.cols());
    if (cache.task == Task::graph_classification) {
        auto p = softmax(cache.logits.row(0));
        for (std::size_t k = 0; k < p.size(); ++k) d(0, k) = p[k];
        d(0, static_cast<std::size_t>(target.classes.front())) -= 1.0;
        return d;
    }
    const double w = 1.0 / static_cast<double>(target.nodes.size());
    for (auto v : target.nodes) {
        auto p = softmax(cache.logits.row(v));
        for (std::size_t k = 0; k < p.size(); ++k) d(v, k) += w * p[k];
        d(v, static_cast<std::size_t>(target.classes[v])) -= w;
    }
    return d;
}

GradientBundle backward_from_logits(const ModelParams& params, const ForwardCache& cache, const Matrix& dlogits,
                                    const GradientRequest& wants) {
    require_same_shape(dlogits, cache.logits, "backward: logit gradient");
    const bool graph_task = params.task == Task::graph_classification;
    if (wants.hidden_layer) {
        const int layer = *wants.hidden_layer;
        const int max_layer = graph_task ? 2 : 1;
        if (layer < 0 || layer > max_layer) {
            throw ModelError("hidden gradient requested for invalid layer " + std::to_string(layer));
        }
    }
    const int hidden = wants.hidden_layer.value_or(-1);
    const bool need_conv1 = wants.params || wants.x0 || wants.mask || hidden == 0;
    const bool need_dx1 = need_conv1 || hidden == 1;
    const std::size_t n = cache.num_nodes();

    GradientBundle g;
    Matrix dz2;
    if (graph_task) {
        if (wants.params) {
            g.head_w = matmul_at_b(cache.readout, dlogits);
            g.head_b = dlogits;
        }
        const Matrix dreadout = matmul_a_bt(dlogits, params.head_w);
        Matrix dx2(n, params.hidden);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < params.hidden; ++k) dx2(i, k) = dreadout(0, k) * inv_n;
        }
        if (hidden == 2) g.hidden = dx2;
        dz2 = relu_backward(dx2, cache.conv2.z);
    } else {
        dz2 = dlogits;
    }

    if (!wants.params && !need_dx1) return g;

    auto c2 = conv_backward(cache.propagation, params.w2, cache.conv2, dz2, wants.params, need_dx1, wants.mask);
    if (wants.params) g.w2 = std::move(c2.dw);
    if (hidden == 1) g.hidden = c2.dinput;

    if (need_conv1) {
        const Matrix dz1 = relu_backward(c2.dinput, cache.conv1.z);
        const bool want_dx0 = wants.x0 || hidden == 0;
        auto c1 = conv_backward(cache.propagation, params.w1, cache.conv1, dz1, wants.params, want_dx0, wants.mask);
        if (wants.params) g.w1 = std::move(c1.dw);
        if (want_dx0) {
            if (wants.x0) g.x0 = c1.dinput;
            if (hidden == 0) g.hidden = std::move(c1.dinput);
        }
        if (wants.mask) {
            Matrix dp = add(c1.dp, c2.dp);
            const Matrix& base = cache.masked ? cache.base_adjacency : cache.propagation;
            g.mask = hadamard(dp, base);
        }
    }
    return g;
}

GradientBundle backward(const ModelParams& params, const ForwardCache& cache, const LossTarget& target,
                        const GradientRequest& wants) {
    return backward_from_logits(params, cache, loss_logit_gradient(cache, target), wants);
}

int predicted_class(const ForwardCache& cache, std::size_t node) {
    const std::size_t row = cache.task == Task::graph_classification ? 0 : node;
    if (row >= cache.logits.rows()) throw ModelError("node " + std::to_string(node) + " out of range");
    auto r = cache.logits.row(row);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json architecture_descriptor(const ModelParams& params) {
    nlohmann::ordered_json a;
    a["family"] = "gcn";
    a["conv_layers"] = 2;
    a["activation"] = "relu";
    a["relu_subgradient_at_zero"] = 0;
    a["adjacency"] = "sym_norm_self_loops";
    a["conv_bias"] = false;
    if (params.task == Task::graph_classification) {
        a["readout"] = "mean";
        a["head"] = "affine";
        a["head_bias"] = true;
    } else {
        a["readout"] = "none";
        a["head"] = "second_conv_logits";
        a["head_bias"] = false;
    }
    return a;
}

namespace {

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    nlohmann::ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.values().begin(), m.values().end());
    return j;
}

Matrix matrix_from_json(const nlohmann::json& j) {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

} // namespace

nlohmann::ordered_json model_to_json(const ModelParams& params, const std::string& train_config_fingerprint) {
    nlohmann::ordered_json j;
    j["format_version"] = model_format_version;
    j["architecture"] = architecture_descriptor(params);
    j["task"] = to_string(params.task);
    j["in_dim"] = params.in_dim;
    j["hidden"] = params.hidden;
    j["classes"] = params.classes;
    j["train_config_fingerprint"] = train_config_fingerprint;
    j["fingerprint"] = hex64(params.fingerprint());
    nlohmann::ordered_json w;
    w["w1"] = matrix_to_json(params.w1);
    w["w2"] = matrix_to_json(params.w2);
    if (params.task == Task::graph_classification) {
        w["head_w"] = matrix_to_json(params.head_w);
        w["head_b"] = matrix_to_json(params.head_b);
    }
    j["weights"] = std::move(w);
    return j;
}

ModelParams model_from_json(const nlohmann::json& j) {
    ModelParams p;
    try {
        const int version = j.at("format_version").get<int>();
        if (version != model_format_version) {
            throw ModelError("unsupported model format_version " + std::to_string(version));
        }
        p.task = task_from_string(j.at("task").get<std::string>());
        p.in_dim = j.at("in_dim").get<std::size_t>();
        p.hidden = j.at("hidden").get<std::size_t>();
        p.classes = j.at("classes").get<std::size_t>();
        const auto& w = j.at("weights");
        p.w1 = matrix_from_json(w.at("w1"));
        p.w2 = matrix_from_json(w.at("w2"));
        if (p.task == Task::graph_classification) {
            p.head_w = matrix_from_json(w.at("head_w"));
            p.head_b = matrix_from_json(w.at("head_b"));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    } catch (const ShapeError& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
    p.validate();
    return p;
}

void save_model(const ModelParams& params, const std::filesystem::path& path,
                const std::string& train_config_fingerprint) {
    write_text_atomic(path, model_to_json(params, train_config_fingerprint).dump(1) + "\n");
}

ModelParams load_model(const std::filesystem::path& path) {
    return model_from_json(read_json(path));
}

void check_compatible(const ModelParams& params, const Dataset& d) {
    if (params.task != d.task) {
        throw ModelError("model task " + to_string(params.task) + " does not match dataset task " + to_string(d.task));
    }
    if (params.classes != d.num_classes) {
        throw ModelError("model has " + std::to_string(params.classes) + " classes, dataset has " +
                         std::to_string(d.num_classes));
    }
    if (!d.graphs.empty() && d.graphs.front().feature_dim() != params.in_dim) {
        throw ModelError("model input width " + std::to_string(params.in_dim) + " does not match dataset feature width " +
                         std::to_string(d.graphs.front().feature_dim()));
    }
}

} // namespace advgnn
