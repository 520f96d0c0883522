#include "advgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "advgnn/io.hpp"

namespace advgnn {

std::string to_string(Task task) {
    return task == Task::graph_classification ? "graph_classification" : "node_classification";
}

Task task_from_string(const std::string& name) {
    if (name == "graph_classification") return Task::graph_classification;
    if (name == "node_classification") return Task::node_classification;
    throw GraphError("unknown task '" + name + "'");
}

std::string to_string(SplitPart part) {
    switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::val: return "val";
    case SplitPart::test: return "test";
    }
    return "?";
}

SplitPart split_part_from_string(const std::string& name) {
    if (name == "train") return SplitPart::train;
    if (name == "val") return SplitPart::val;
    if (name == "test") return SplitPart::test;
    throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

void Graph::validate() const {
    if (features.rows() != num_nodes) {
        throw GraphError("feature rows " + std::to_string(features.rows()) + " != node count " +
                         std::to_string(num_nodes));
    }
    if (!all_finite(features)) {
        throw GraphError("non-finite node feature");
    }
    std::set<Edge> seen;
    for (const auto& e : edges) {
        if (e.u >= num_nodes || e.v >= num_nodes) {
            throw GraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") out of range for " +
                             std::to_string(num_nodes) + " nodes");
        }
        if (e.u == e.v) {
            throw GraphError("self-loop at node " + std::to_string(e.u));
        }
        if (e.u > e.v) {
            throw GraphError("edge not in canonical (u < v) order");
        }
        if (!seen.insert(e).second) {
            throw GraphError("duplicate edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ")");
        }
    }
    auto check_gt = [&](const GroundTruth& gt) {
        for (auto v : gt.nodes) {
            if (v >= num_nodes) throw GraphError("ground-truth node out of range");
        }
        for (const auto& e : gt.edges) {
            if (!seen.contains(e)) throw GraphError("ground-truth edge is not a graph edge");
        }
    };
    check_gt(ground_truth);
    if (!node_ground_truth.empty()) {
        if (node_ground_truth.size() != num_nodes) {
            throw GraphError("per-node ground truth must have one entry per node");
        }
        for (const auto& gt : node_ground_truth) check_gt(gt);
    }
}

std::optional<std::size_t> Graph::edge_index(std::size_t a, std::size_t b) const {
    const Edge key = Edge::make(a, b);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i] == key) return i;
    }
    return std::nullopt;
}

std::vector<std::vector<std::size_t>> Graph::adjacency_lists() const {
    std::vector<std::vector<std::size_t>> adj(num_nodes);
    for (const auto& e : edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return adj;
}

Matrix normalize_adjacency(const Graph& g) {
    const std::size_t n = g.num_nodes;
    std::vector<double> degree(n, 1.0);
    for (const auto& e : g.edges) {
        degree[e.u] += 1.0;
        degree[e.v] += 1.0;
    }
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = inv_sqrt[i] * inv_sqrt[i];
    for (const auto& e : g.edges) {
        const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
        a(e.u, e.v) = w;
        a(e.v, e.u) = w;
    }
    return a;
}

void Dataset::validate() const {
    if (num_classes < 1) throw GraphError("num_classes must be positive");
    if (task == Task::node_classification && graphs.size() != 1) {
        throw GraphError("node classification datasets hold exactly one graph, found " +
                         std::to_string(graphs.size()));
    }
    std::size_t dim = graphs.empty() ? 0 : graphs.front().feature_dim();
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& g = graphs[i];
        try {
            g.validate();
        } catch (const GraphError& e) {
            throw GraphError("graph " + std::to_string(i) + ": " + e.what());
        }
        if (g.feature_dim() != dim) throw GraphError("graph " + std::to_string(i) + ": inconsistent feature width");
        const std::size_t want = task == Task::graph_classification ? 1 : g.num_nodes;
        if (g.labels.size() != want) {
            throw GraphError("graph " + std::to_string(i) + ": expected " + std::to_string(want) + " labels");
        }
        for (int y : g.labels) {
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
                throw GraphError("graph " + std::to_string(i) + ": label " + std::to_string(y) + " out of range");
            }
        }
    }
    if (!split.empty()) {
        const std::size_t count = instance_count();
        std::vector<int> hits(count, 0);
        for (const auto* part : {&split.train, &split.val, &split.test}) {
            for (auto i : *part) {
                if (i >= count) throw GraphError("split index out of range");
                ++hits[i];
            }
        }
        if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; })) {
            throw GraphError("split parts must be disjoint and cover every instance");
        }
    }
}

std::size_t Dataset::instance_count() const {
    if (task == Task::graph_classification) return graphs.size();
    return graphs.empty() ? 0 : graphs.front().num_nodes;
}

std::vector<int> Dataset::instance_labels() const {
    if (task == Task::node_classification) return graphs.empty() ? std::vector<int>{} : graphs.front().labels;
    std::vector<int> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(g.labels.front());
    return out;
}

const std::vector<std::size_t>& Dataset::indices(SplitPart part) const {
    switch (part) {
    case SplitPart::train: return split.train;
    case SplitPart::val: return split.val;
    case SplitPart::test: return split.test;
    }
    return split.test;
}

namespace {

std::array<std::size_t, 3> largest_remainder(std::size_t total, const SplitFractions& f) {
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        const double q = f[s] * static_cast<double>(total);
        const double fl = std::floor(q + 1e-9);
        out[s] = static_cast<std::size_t>(fl);
        rem[s] = std::max(0.0, q - fl);
        assigned += out[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % 3) {
        ++out[order[k]];
        ++assigned;
    }
    return out;
}

} // namespace

Dataset split_dataset(const Dataset& d, const SplitFractions& fractions, Rng& rng) {
    for (double f : fractions) {
        if (!(f > 0.0)) throw std::invalid_argument("split fractions must be positive");
    }
    const double sum = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("split fractions must sum to 1 (got " + format_double(sum) + ")");
    }

    const auto labels = d.instance_labels();
    const std::size_t total = labels.size();
    const auto totals = largest_remainder(total, fractions);

    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < total; ++i) members[labels[i]].push_back(i);

    // Per-(class, split) apportionment with fixed row and column sums.
    const std::size_t nc = members.size();
    std::vector<int> classes;
    std::vector<std::array<std::size_t, 3>> cells(nc);
    std::vector<std::array<double, 3>> rem(nc);
    std::vector<std::size_t> row_deficit(nc);
    std::array<std::size_t, 3> col_deficit = totals;
    std::size_t c = 0;
    for (const auto& [label, idx] : members) {
        classes.push_back(label);
        std::size_t used = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            const double q = static_cast<double>(idx.size()) * static_cast<double>(totals[s]) /
                             static_cast<double>(total);
            const double fl = std::floor(q + 1e-9);
            cells[c][s] = static_cast<std::size_t>(fl);
            rem[c][s] = std::max(0.0, q - fl);
            used += cells[c][s];
            col_deficit[s] -= std::min(col_deficit[s], cells[c][s]);
        }
        row_deficit[c] = idx.size() - used;
        ++c;
    }
    struct Slot {
        double rem;
        std::size_t cls;
        std::size_t part;
    };
    std::vector<Slot> slots;
    for (std::size_t k = 0; k < nc; ++k) {
        for (std::size_t s = 0; s < 3; ++s) slots.push_back({rem[k][s], k, s});
    }
    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.rem > b.rem; });
    for (const auto& slot : slots) {
        if (row_deficit[slot.cls] > 0 && col_deficit[slot.part] > 0) {
            ++cells[slot.cls][slot.part];
            --row_deficit[slot.cls];
            --col_deficit[slot.part];
        }
    }
    for (std::size_t k = 0; k < nc; ++k) {
        for (std::size_t s = 0; s < 3 && row_deficit[k] > 0; ++s) {
            while (row_deficit[k] > 0 && col_deficit[s] > 0) {
                ++cells[k][s];
                --row_deficit[k];
                --col_deficit[s];
            }
        }
    }

    Dataset out = d;
    out.split = Split{};
    for (std::size_t k = 0; k < nc; ++k) {
        auto& cell = cells[k];
        const std::size_t size = members[classes[k]].size();
        if (size < 3) {
            out.split.warnings.push_back("class " + std::to_string(classes[k]) + " has " + std::to_string(size) +
                                         " member(s); not every split can contain it");
        } else {
            // Cover every split when a count-preserving swap with another class exists.
            for (std::size_t s = 0; s < 3; ++s) {
                if (cell[s] != 0) continue;
                const auto donor = static_cast<std::size_t>(std::max_element(cell.begin(), cell.end()) - cell.begin());
                bool fixed = false;
                for (std::size_t other = 0; other < nc && !fixed; ++other) {
                    if (other == k || cells[other][s] < 2) continue;
                    --cell[donor];
                    ++cell[s];
                    --cells[other][s];
                    ++cells[other][donor];
                    fixed = true;
                }
                if (!fixed) {
                    out.split.warnings.push_back("class " + std::to_string(classes[k]) + " absent from " +
                                                 to_string(static_cast<SplitPart>(s)) + " split");
                }
            }
        }
    }
    for (std::size_t k = 0; k < nc; ++k) {
        const auto& cell = cells[k];
        auto idx = members[classes[k]];
        rng.shuffle(idx);
        std::size_t pos = 0;
        std::vector<std::size_t>* parts[3] = {&out.split.train, &out.split.val, &out.split.test};
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t i = 0; i < cell[s]; ++i) parts[s]->push_back(idx[pos++]);
        }
    }
    std::sort(out.split.train.begin(), out.split.train.end());
    std::sort(out.split.val.begin(), out.split.val.end());
    std::sort(out.split.test.begin(), out.split.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::ordered_json edges_to_json(const std::vector<Edge>& edges) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : edges) arr.push_back({e.u, e.v});
    return arr;
}

std::vector<Edge> edges_from_json(const nlohmann::json& j) {
    std::vector<Edge> out;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 2) throw GraphError("edge must be a [u, v] pair");
        const auto a = p[0].get<std::size_t>();
        const auto b = p[1].get<std::size_t>();
        if (a == b) throw GraphError("self-loop at node " + std::to_string(a));
        out.push_back(Edge::make(a, b));
    }
    return out;
}

nlohmann::ordered_json matrix_rows_to_json(const Matrix& m) {
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        arr.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    }
    return arr;
}

Matrix matrix_rows_from_json(const nlohmann::json& j, std::size_t rows) {
    if (!j.is_array() || j.size() != rows) throw GraphError("features must have one row per node");
    const std::size_t cols = rows == 0 ? 0 : j[0].size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw GraphError("ragged feature matrix");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

} // namespace

nlohmann::ordered_json dataset_to_json(const Dataset& d) {
    nlohmann::ordered_json j;
    j["format_version"] = dataset_format_version;
    if (!d.generator.is_null()) j["generator"] = d.generator;
    j["task"] = to_string(d.task);
    j["num_classes"] = d.num_classes;
    if (!d.split.empty()) {
        j["split"] = {{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}};
    }
    auto graphs = nlohmann::ordered_json::array();
    for (const auto& g : d.graphs) {
        nlohmann::ordered_json gj;
        gj["num_nodes"] = g.num_nodes;
        gj["edges"] = edges_to_json(g.edges);
        gj["features"] = matrix_rows_to_json(g.features);
        if (d.task == Task::graph_classification) {
            gj["label"] = g.labels.empty() ? 0 : g.labels.front();
            if (!g.ground_truth.nodes.empty()) gj["ground_truth_nodes"] = g.ground_truth.nodes;
            if (!g.ground_truth.edges.empty()) gj["ground_truth_edges"] = edges_to_json(g.ground_truth.edges);
        } else {
            gj["label"] = g.labels;
            if (!g.node_ground_truth.empty()) {
                auto nodes = nlohmann::ordered_json::array();
                auto edges = nlohmann::ordered_json::array();
                for (const auto& gt : g.node_ground_truth) {
                    nodes.push_back(gt.nodes);
                    edges.push_back(edges_to_json(gt.edges));
                }
                gj["ground_truth_nodes"] = nodes;
                gj["ground_truth_edges"] = edges;
            }
        }
        graphs.push_back(std::move(gj));
    }
    j["graphs"] = std::move(graphs);
    return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset d;
    try {
        const int version = j.value("format_version", dataset_format_version);
        if (version != dataset_format_version) {
            throw GraphError("unsupported dataset format_version " + std::to_string(version));
        }
        if (j.contains("generator")) d.generator = j["generator"];
        d.task = task_from_string(j.at("task").get<std::string>());
        d.num_classes = j.at("num_classes").get<std::size_t>();
        for (const auto& gj : j.at("graphs")) {
            Graph g;
            g.num_nodes = gj.at("num_nodes").get<std::size_t>();
            g.edges = edges_from_json(gj.at("edges"));
            g.features = matrix_rows_from_json(gj.at("features"), g.num_nodes);
            const auto& label = gj.at("label");
            if (label.is_array()) {
                g.labels = label.get<std::vector<int>>();
            } else {
                g.labels = {label.get<int>()};
            }
            if (d.task == Task::graph_classification) {
                if (gj.contains("ground_truth_nodes")) {
                    g.ground_truth.nodes = gj["ground_truth_nodes"].get<std::vector<std::size_t>>();
                }
                if (gj.contains("ground_truth_edges")) g.ground_truth.edges = edges_from_json(gj["ground_truth_edges"]);
            } else if (gj.contains("ground_truth_nodes") || gj.contains("ground_truth_edges")) {
                g.node_ground_truth.resize(g.num_nodes);
                if (gj.contains("ground_truth_nodes")) {
                    const auto& arr = gj["ground_truth_nodes"];
                    if (arr.size() != g.num_nodes) throw GraphError("ground_truth_nodes needs one entry per node");
                    for (std::size_t v = 0; v < g.num_nodes; ++v) {
                        g.node_ground_truth[v].nodes = arr[v].get<std::vector<std::size_t>>();
                    }
                }
                if (gj.contains("ground_truth_edges")) {
                    const auto& arr = gj["ground_truth_edges"];
                    if (arr.size() != g.num_nodes) throw GraphError("ground_truth_edges needs one entry per node");
                    for (std::size_t v = 0; v < g.num_nodes; ++v) {
                        g.node_ground_truth[v].edges = edges_from_json(arr[v]);
                    }
                }
            }
            d.graphs.push_back(std::move(g));
        }
        if (j.contains("split")) {
            const auto& s = j["split"];
            d.split.train = s.at("train").get<std::vector<std::size_t>>();
            d.split.val = s.at("val").get<std::vector<std::size_t>>();
            d.split.test = s.at("test").get<std::vector<std::size_t>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw GraphError(std::string("malformed dataset: ") + e.what());
    }
    d.validate();
    return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    write_text_atomic(path, dataset_to_json(d).dump(1) + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
    return dataset_from_json(read_json(path));
}

} // namespace advgnn
