#ifndef ADVGNN_GCN_HPP
#define ADVGNN_GCN_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/graph.hpp"
#include "advgnn/matrix.hpp"
#include "advgnn/rng.hpp"

namespace advgnn {

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Weights of the fixed two-layer GCN.
///
/// Graph task: X1 = relu(P X0 W1), X2 = relu(P X1 W2), r = mean_rows(X2),
/// logits = r head_w + head_b.
/// Node task:  X1 = relu(P X0 W1), logits = P X1 W2 (one row per node).
/// P is the normalized adjacency, optionally multiplied entry-wise by a mask.
/// The convolutions carry no bias; only the graph-task head does.
struct ModelParams {
    Task task = Task::graph_classification;
    std::size_t in_dim = 0;
    std::size_t hidden = 0;
    std::size_t classes = 0;
    Matrix w1;
    Matrix w2;
    Matrix head_w;  ///< hidden x classes, graph task only
    Matrix head_b;  ///< 1 x classes, graph task only

    static ModelParams init(Task task, std::size_t in_dim, std::size_t hidden, std::size_t classes, Rng& rng);

    void validate() const;
    std::vector<std::span<double>> blocks();
    std::vector<std::span<const double>> blocks() const;
    /// Hash of the architecture and every weight bit.
    std::uint64_t fingerprint() const;

    bool operator==(const ModelParams&) const = default;
};

/// Fresh Glorot draw for every weight, zero biases, same shapes.
ModelParams randomize(const ModelParams& params, Rng& rng);

/// Adds `delta` to X_layer (0 = input features, 1 = first hidden layer)
/// before the following aggregation.
struct Injection {
    int layer = 0;
    Matrix delta;
};

struct ForwardOptions {
    const Matrix* mask = nullptr;
    const Injection* inject = nullptr;
};

/// One graph convolution Z = P H W, evaluated in whichever association order
/// is cheaper. `inner` is P H when `aggregate_first`, else H W.
struct ConvState {
    Matrix input;
    Matrix inner;
    bool aggregate_first = true;
    Matrix z;
};

struct ForwardCache {
    Task task = Task::graph_classification;
    Matrix propagation;     ///< normalized adjacency, masked when a mask was given
    Matrix base_adjacency;  ///< unmasked normalized adjacency; empty when no mask
    bool masked = false;
    ConvState conv1;        ///< conv1.input = X0 (+ delta at layer 0)
    Matrix x1;              ///< relu(conv1.z) (+ delta at layer 1)
    ConvState conv2;
    Matrix x2;              ///< graph task only
    Matrix readout;         ///< graph task only, 1 x hidden
    Matrix logits;          ///< 1 x C (graph task) or n x C (node task)

    const Matrix& x0() const noexcept { return conv1.input; }
    std::size_t num_nodes() const noexcept { return conv1.input.rows(); }
};

/// Loss target: one class per graph, or per-node classes plus the node set the
/// loss averages over.
struct LossTarget {
    std::vector<int> classes;
    std::vector<std::size_t> nodes;

    static LossTarget graph(int cls) { return {{cls}, {}}; }
    static LossTarget node_set(std::vector<int> classes, std::vector<std::size_t> nodes) {
        return {std::move(classes), std::move(nodes)};
    }
};

struct GradientRequest {
    bool params = true;
    bool x0 = false;
    /// 0 => X0, 1 => X1, 2 => X2 (graph task only).
    std::optional<int> hidden_layer;
    bool mask = false;
};

struct GradientBundle {
    Matrix w1;
    Matrix w2;
    Matrix head_w;
    Matrix head_b;
    std::optional<Matrix> x0;
    std::optional<Matrix> hidden;
    std::optional<Matrix> mask;

    std::vector<std::span<const double>> param_blocks() const;
};

ForwardCache forward(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                     const ForwardOptions& opts = {});
ForwardCache forward(const ModelParams& params, const Graph& g, const ForwardOptions& opts = {});

/// Softmax cross-entropy. Node tasks average over `target.nodes`.
double loss(const ForwardCache& cache, const LossTarget& target);

/// d loss / d logits.
Matrix loss_logit_gradient(const ForwardCache& cache, const LossTarget& target);

/// Reverse pass from an arbitrary upstream gradient on the logits.
GradientBundle backward_from_logits(const ModelParams& params, const ForwardCache& cache, const Matrix& dlogits,
                                    const GradientRequest& wants);

GradientBundle backward(const ModelParams& params, const ForwardCache& cache, const LossTarget& target,
                        const GradientRequest& wants);

/// Argmax of the logits (graph task) or of row `node` (node task).
int predicted_class(const ForwardCache& cache, std::size_t node = 0);

/// Numerically stable log-sum-exp softmax of one logit row.
std::vector<double> softmax(std::span<const double> logits);

inline constexpr int model_format_version = 1;

nlohmann::ordered_json architecture_descriptor(const ModelParams& params);
nlohmann::ordered_json model_to_json(const ModelParams& params, const std::string& train_config_fingerprint = "");
ModelParams model_from_json(const nlohmann::json& j);
void save_model(const ModelParams& params, const std::filesystem::path& path,
                const std::string& train_config_fingerprint = "");
ModelParams load_model(const std::filesystem::path& path);

/// Throws ModelError if the model cannot run on `d` (feature width, classes, task).
void check_compatible(const ModelParams& params, const Dataset& d);

} // namespace advgnn

#endif // ADVGNN_GCN_HPP
