#ifndef ADVGNN_SYNTH_HPP
#define ADVGNN_SYNTH_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/graph.hpp"
#include "advgnn/rng.hpp"

namespace advgnn {

class GeneratorError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A typed subgraph planted into positive graphs.
struct MotifSpec {
    std::size_t num_nodes = 0;
    std::vector<Edge> edges;
    /// Feature type (one-hot column) of every motif node.
    std::vector<std::size_t> node_types;
    /// Motif node joined to a uniformly chosen base node.
    std::size_t attach_node = 0;

    /// Four-node star: center of a type reserved for motifs, three leaves.
    static MotifSpec star(std::size_t center_type = 7, std::size_t leaf_type = 6);
    void validate(std::size_t feature_types) const;
};

struct MotifGraphConfig {
    std::size_t count = 600;
    std::size_t min_base_nodes = 10;
    std::size_t max_base_nodes = 20;
    /// Random non-tree edges added to each base tree.
    std::size_t extra_edges = 3;
    std::size_t feature_types = 8;
    double class_balance = 0.5;
    MotifSpec motif = MotifSpec::star();
    /// Types never drawn for base nodes.
    std::vector<std::size_t> reserved_types{7};

    void validate() const;
};

nlohmann::ordered_json to_json(const MotifGraphConfig& cfg);
MotifGraphConfig motif_graph_config_from_json(const nlohmann::json& j, MotifGraphConfig base = {});

/// Graph classification dataset; class 1 iff the motif was planted, with the
/// motif's nodes and edges recorded as ground truth.
Dataset gen_motif_graphs(const MotifGraphConfig& cfg, const Rng& rng);

/// Brute-force search for a type- and edge-preserving injection of the motif
/// (non-induced). Node types are the argmax of each feature row.
bool contains_motif(const Graph& g, const MotifSpec& motif);

struct BaShapesConfig {
    std::size_t base_nodes = 300;
    std::size_t motif_count = 80;
    /// Edges per new node in preferential attachment.
    std::size_t attach_edges = 5;
    /// One-hot degree buckets; the last bucket collects every larger degree.
    std::size_t degree_buckets = 10;

    void validate() const;
};

nlohmann::ordered_json to_json(const BaShapesConfig& cfg);
BaShapesConfig ba_shapes_config_from_json(const nlohmann::json& j, BaShapesConfig base = {});

/// Labels: 0 base, 1 house top, 2 house middle, 3 house bottom.
inline constexpr int house_top = 1;
inline constexpr int house_middle = 2;
inline constexpr int house_bottom = 3;

/// Single-graph node classification dataset: a preferential-attachment base
/// with five-node houses hung off it by one edge each. Every house node's
/// ground truth is its house (5 nodes, 6 edges).
Dataset gen_ba_shapes(const BaShapesConfig& cfg, const Rng& rng);

} // namespace advgnn

#endif // ADVGNN_SYNTH_HPP
