#ifndef ADVGNN_EXPLAINERS_HPP
#define ADVGNN_EXPLAINERS_HPP

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/gcn.hpp"
#include "advgnn/graph.hpp"

namespace advgnn {

class ExplainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ExplainMethod { vanilla_grad, grad_cam, gnn_explainer };
enum class AttributionKind { node, node_feature, edge };
enum class NodeReduce { sum_abs, l2 };

std::string to_string(ExplainMethod m);
/// Accepts "VG", "GC", "GNNX" and the long names; throws std::invalid_argument
/// listing the valid names otherwise.
ExplainMethod explain_method_from_string(const std::string& name);
std::string short_name(ExplainMethod m);
std::string to_string(AttributionKind k);

struct ExplainerConfig {
    int gnnx_iterations = 100;
    double gnnx_lr = 0.01;
    double gnnx_size_reg = 0.005;
    double gnnx_entropy_reg = 1.0;
    double mask_init = 0.0;
    NodeReduce node_reduce = NodeReduce::sum_abs;

    void validate() const;
};

nlohmann::ordered_json to_json(const ExplainerConfig& cfg);
ExplainerConfig explainer_config_from_json(const nlohmann::json& j, ExplainerConfig base = {});

/// Which logit to explain. The class defaults to the model's prediction;
/// node tasks must name the node.
struct ExplainTarget {
    std::optional<int> cls;
    std::optional<std::size_t> node;
};

struct Attribution {
    AttributionKind kind = AttributionKind::node;
    ExplainMethod method = ExplainMethod::vanilla_grad;
    /// One score per node (kind node) or per stored edge (kind edge).
    std::vector<double> scores;
    /// Per node, per input feature; vanilla gradients only.
    Matrix feature_scores;
    int target_class = 0;
    std::optional<std::size_t> target_node;
    std::string model_fingerprint;
};

Attribution vanilla_grad(const ModelParams& params, const Graph& g, const ExplainTarget& target = {},
                         const ExplainerConfig& cfg = {});

/// Channel weights are node-averaged gradients of the target logit at the last
/// convolution output (X2 for graph tasks, X1 for node tasks); node score is
/// relu(sum_k weight_k * X_last[v, k]).
Attribution grad_cam(const ModelParams& params, const Graph& g, const ExplainTarget& target = {});

/// Channel weights alone, exposed for testing.
std::vector<double> grad_cam_channel_weights(const ModelParams& params, const Graph& g, const ExplainTarget& target);

/// Learns one sigmoid mask logit per undirected edge that keeps the model's
/// prediction while penalizing mask size and entropy. Node tasks only
/// optimize inside the target's two-hop computation graph; edges outside it
/// receive no prediction gradient and follow the regularizers alone.
Attribution gnn_explainer(const ModelParams& params, const Graph& g, const ExplainTarget& target = {},
                          const ExplainerConfig& cfg = {});

/// Reference implementation on the full dense graph, for cross-checking.
Attribution gnn_explainer_full_graph(const ModelParams& params, const Graph& g, const ExplainTarget& target = {},
                                     const ExplainerConfig& cfg = {});

Attribution explain(ExplainMethod method, const ModelParams& params, const Graph& g, const ExplainTarget& target = {},
                    const ExplainerConfig& cfg = {});

nlohmann::ordered_json attribution_to_json(const Attribution& a, const Graph& g, const std::string& graph_id);

/// Graphviz rendering; yellow marks the most important nodes/edges, pink the least.
std::string attribution_to_dot(const Attribution& a, const Graph& g, const std::string& graph_id);

/// "#rrggbb" on the pink -> yellow ramp, t in [0, 1].
std::string importance_color(double t);

} // namespace advgnn

#endif // ADVGNN_EXPLAINERS_HPP
