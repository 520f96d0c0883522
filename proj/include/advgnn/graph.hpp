#ifndef ADVGNN_GRAPH_HPP
#define ADVGNN_GRAPH_HPP

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/matrix.hpp"
#include "advgnn/rng.hpp"

namespace advgnn {

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Undirected edge, stored with u < v.
struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;

    static Edge make(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }
    auto operator<=>(const Edge&) const = default;
};

struct GroundTruth {
    std::vector<std::size_t> nodes;
    std::vector<Edge> edges;

    bool empty() const noexcept { return nodes.empty() && edges.empty(); }
    bool operator==(const GroundTruth&) const = default;
};

enum class Task { graph_classification, node_classification };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

/// An attributed, undirected graph without self-loops.
///
/// `labels` holds one class for graph classification and one class per node
/// for node classification. Graph-level ground truth lives in `ground_truth`;
/// node tasks carry one explanation set per node in `node_ground_truth`.
struct Graph {
    std::size_t num_nodes = 0;
    std::vector<Edge> edges;
    Matrix features;
    std::vector<int> labels;
    GroundTruth ground_truth;
    std::vector<GroundTruth> node_ground_truth;

    /// Checks every structural invariant; throws GraphError on violation.
    void validate() const;
    /// Position of edge {a, b} in `edges`, if present.
    std::optional<std::size_t> edge_index(std::size_t a, std::size_t b) const;
    std::vector<std::vector<std::size_t>> adjacency_lists() const;
    std::size_t feature_dim() const noexcept { return features.cols(); }

    bool operator==(const Graph&) const = default;
};

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
Matrix normalize_adjacency(const Graph& g);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    std::vector<std::string> warnings;

    bool empty() const noexcept { return train.empty() && val.empty() && test.empty(); }
    bool operator==(const Split&) const = default;
};

enum class SplitPart { train, val, test };
std::string to_string(SplitPart part);
SplitPart split_part_from_string(const std::string& name);

struct Dataset {
    Task task = Task::graph_classification;
    std::size_t num_classes = 0;
    std::vector<Graph> graphs;
    Split split;
    /// Generator provenance echoed into the file; null when absent.
    nlohmann::json generator;

    void validate() const;
    /// Number of splittable instances: graphs, or nodes of the single graph.
    std::size_t instance_count() const;
    /// Class of every splittable instance.
    std::vector<int> instance_labels() const;
    const std::vector<std::size_t>& indices(SplitPart part) const;

    bool operator==(const Dataset&) const = default;
};

using SplitFractions = std::array<double, 3>;

/// Stratified train/val/test split. Split totals use largest-remainder
/// rounding of the fractions; per-class counts are then apportioned against
/// those totals, remainder ties going to the lower class index.
Dataset split_dataset(const Dataset& d, const SplitFractions& fractions, Rng& rng);

inline constexpr int dataset_format_version = 1;

nlohmann::ordered_json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

} // namespace advgnn

#endif // ADVGNN_GRAPH_HPP
