#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "advgnn/adversarial.hpp"
#include "advgnn/explainers.hpp"
#include "advgnn/io.hpp"
#include "advgnn/synth.hpp"
#include "test_support.hpp"

using namespace advgnn;

namespace {

double logit_of(const ModelParams& p, const Matrix& adj, const Matrix& x, std::size_t row, int cls) {
    return forward(p, adj, x).logits(row, static_cast<std::size_t>(cls));
}

std::vector<std::size_t> order_of(const std::vector<double>& s) {
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    return idx;
}

Graph permuted(const Graph& g, const std::vector<std::size_t>& perm) {
    // perm[old] = new
    Graph h = g;
    h.features = Matrix(g.num_nodes, g.feature_dim());
    for (std::size_t v = 0; v < g.num_nodes; ++v)
        for (std::size_t k = 0; k < g.feature_dim(); ++k) h.features(perm[v], k) = g.features(v, k);
    h.edges.clear();
    for (const auto& e : g.edges) h.edges.push_back(Edge::make(perm[e.u], perm[e.v]));
    std::sort(h.edges.begin(), h.edges.end());
    return h;
}

Dataset tiny_ba(std::uint64_t seed) {
    BaShapesConfig cfg;
    cfg.base_nodes = 25;
    cfg.motif_count = 3;
    return gen_ba_shapes(cfg, Rng(seed));
}

} // namespace

TEST(ExplainMethodNames, ParseAndReject) {
    EXPECT_EQ(explain_method_from_string("VG"), ExplainMethod::vanilla_grad);
    EXPECT_EQ(explain_method_from_string("grad_cam"), ExplainMethod::grad_cam);
    EXPECT_EQ(explain_method_from_string("gnnx"), ExplainMethod::gnn_explainer);
    try {
        explain_method_from_string("SmoothGrad");
        FAIL();
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        for (const char* name : {"VG", "GC", "GNNX"}) EXPECT_NE(msg.find(name), std::string::npos);
    }
}

TEST(VanillaGrad, DeadFeatureColumnsAttributeZero) {
    Rng rng(1);
    auto g = fixtures::random_graph(6, 2, rng, 0.5);
    // Duplicate the features; the copy only reaches the model through zero weights.
    Matrix x(6, 4);
    for (std::size_t v = 0; v < 6; ++v)
        for (std::size_t k = 0; k < 2; ++k) x(v, k) = x(v, k + 2) = g.features(v, k);
    g.features = x;
    auto p = ModelParams::init(Task::graph_classification, 4, 5, 2, rng);
    for (std::size_t k = 0; k < 5; ++k) p.w1(2, k) = p.w1(3, k) = 0.0;
    const auto a = vanilla_grad(p, g);
    for (std::size_t v = 0; v < 6; ++v) {
        EXPECT_EQ(a.feature_scores(v, 2), 0.0);
        EXPECT_EQ(a.feature_scores(v, 3), 0.0);
    }
}

TEST(VanillaGrad, ScalesWithHeadWeights) {
    Rng rng(2);
    const auto g = fixtures::random_graph(7, 3, rng, 0.5);
    auto p = ModelParams::init(Task::graph_classification, 3, 6, 3, rng);
    const ExplainTarget t{1, std::nullopt};
    const auto a = vanilla_grad(p, g, t);
    p.head_w = scale(p.head_w, 2.0);
    const auto b = vanilla_grad(p, g, t);
    for (std::size_t v = 0; v < 7; ++v) EXPECT_NEAR(b.scores[v], 2.0 * a.scores[v], 1e-12 * (1 + a.scores[v]));
    EXPECT_EQ(order_of(a.scores), order_of(b.scores));
}

TEST(VanillaGrad, MatchesFiniteDifferences) {
    Rng rng(3);
    int checked = 0;
    while (checked < 20) {
        const auto task = checked % 2 ? Task::node_classification : Task::graph_classification;
        auto g = fixtures::random_graph(5, 1 + rng.below(4), rng, 0.5);
        const auto p = ModelParams::init(task, g.feature_dim(), 6, 3, rng);
        const Matrix adj = normalize_adjacency(g);
        if (fixtures::min_abs_preactivation(forward(p, adj, g.features)) < 1e-4) continue;
        ExplainTarget t;
        std::size_t row = 0;
        if (task == Task::node_classification) {
            row = rng.below(5);
            t.node = row;
        }
        const auto a = vanilla_grad(p, g, t);
        Matrix x = g.features;
        auto f = [&] { return logit_of(p, adj, x, row, a.target_class); };
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double num = std::abs(fixtures::central_difference(f, x.values()[i], 1e-5));
            EXPECT_LE(fixtures::rel_error(a.feature_scores.values()[i], num), 1e-4);
        }
        ++checked;
    }
}

TEST(VanillaGrad, NodeReduceOptions) {
    Rng rng(4);
    const auto g = fixtures::random_graph(5, 3, rng, 0.6);
    const auto p = ModelParams::init(Task::graph_classification, 3, 4, 2, rng);
    ExplainerConfig l2;
    l2.node_reduce = NodeReduce::l2;
    const auto s = vanilla_grad(p, g);
    const auto q = vanilla_grad(p, g, {}, l2);
    for (std::size_t v = 0; v < 5; ++v) {
        double sum = 0, sq = 0;
        for (double x : s.feature_scores.row(v)) {
            sum += x;
            sq += x * x;
        }
        EXPECT_DOUBLE_EQ(s.scores[v], sum);
        EXPECT_DOUBLE_EQ(q.scores[v], std::sqrt(sq));
    }
}

TEST(GradCam, ScoresNonNegative) {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        const auto g = fixtures::random_graph(3 + rng.below(8), 3, rng);
        const auto p = ModelParams::init(Task::graph_classification, 3, 6, 2, rng);
        for (double s : grad_cam(p, g).scores) EXPECT_GE(s, 0.0);
    }
}

TEST(GradCam, IdenticalEmbeddingsGiveEqualScores) {
    Rng rng(6);
    Graph g;
    g.num_nodes = 5;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) g.edges.push_back({i, j});
    g.features = Matrix(5, 2);
    for (std::size_t v = 0; v < 5; ++v) {
        g.features(v, 0) = 0.7;
        g.features(v, 1) = -0.3;
    }
    g.labels = {0};
    for (auto task : {Task::graph_classification, Task::node_classification}) {
        const auto p = ModelParams::init(task, 2, 6, 2, rng);
        ExplainTarget t;
        if (task == Task::node_classification) t.node = 2;
        const auto a = grad_cam(p, g, t);
        for (double s : a.scores) EXPECT_DOUBLE_EQ(s, a.scores[0]);
    }
}

TEST(GradCam, ChannelWeightsMatchFiniteDifferences) {
    Rng rng(7);
    int checked = 0;
    while (checked < 20) {
        const auto task = checked % 2 ? Task::node_classification : Task::graph_classification;
        auto g = fixtures::random_graph(5, 3, rng, 0.5);
        const auto p = ModelParams::init(task, 3, 6, 3, rng);
        const Matrix adj = normalize_adjacency(g);
        const auto base = forward(p, adj, g.features);
        if (fixtures::min_abs_preactivation(base) < 1e-4) continue;
        ExplainTarget t;
        std::size_t row = 0;
        if (task == Task::node_classification) {
            row = rng.below(5);
            t.node = row;
        }
        const int cls = predicted_class(base, row);
        const auto alpha = grad_cam_channel_weights(p, g, t);
        const double n = 5.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            // Shift channel k of the last layer on every node by h; the
            // derivative of the logit is the sum of per-node gradients.
            double shift = 0.0;
            std::function<double()> f;
            if (task == Task::node_classification) {
                f = [&] {
                    Injection inj{1, Matrix(5, 6)};
                    for (std::size_t v = 0; v < 5; ++v) inj.delta(v, k) = shift;
                    return forward(p, adj, g.features, {nullptr, &inj}).logits(row, cls);
                };
            } else {
                f = [&] {
                    Matrix x2 = base.x2;
                    for (std::size_t v = 0; v < 5; ++v) x2(v, k) += shift;
                    return add(matmul(column_mean(x2), p.head_w), p.head_b)(0, cls);
                };
            }
            const double num = fixtures::central_difference(f, shift, 1e-5) / n;
            EXPECT_LE(fixtures::rel_error(alpha[k], num), 1e-4) << "channel " << k;
        }
        ++checked;
    }
}

TEST(GnnExplainer, NoIterationsLeavesHalf) {
    Rng rng(8);
    const auto g = fixtures::random_graph(6, 3, rng, 0.5);
    const auto p = ModelParams::init(Task::graph_classification, 3, 4, 2, rng);
    ExplainerConfig cfg;
    cfg.gnnx_iterations = 0;
    const auto a = gnn_explainer(p, g, {}, cfg);
    EXPECT_EQ(a.kind, AttributionKind::edge);
    ASSERT_EQ(a.scores.size(), g.edges.size());
    for (double s : a.scores) EXPECT_EQ(s, 0.5);
}

TEST(GnnExplainer, FlatObjectiveLeavesHalf) {
    Rng rng(9);
    const auto g = fixtures::random_graph(6, 3, rng, 0.6);
    auto p = ModelParams::init(Task::graph_classification, 3, 4, 2, rng);
    // Zero first layer: every embedding is 0 and the logits are the bias, so
    // the mask cannot influence the prediction.
    p.w1 = Matrix(3, 4);
    p.head_b = Matrix{{2.0, -1.0}};
    ExplainerConfig cfg;
    cfg.gnnx_size_reg = 0.0;
    cfg.gnnx_entropy_reg = 0.0;
    for (double s : gnn_explainer(p, g, {}, cfg).scores) EXPECT_NEAR(s, 0.5, 1e-12);
}

TEST(GnnExplainer, ScoresStrictlyInsideUnitInterval) {
    Rng rng(10);
    for (int t = 0; t < 5; ++t) {
        const auto g = fixtures::random_graph(8, 3, rng, 0.4);
        const auto p = ModelParams::init(Task::graph_classification, 3, 6, 2, rng);
        for (double s : gnn_explainer(p, g).scores) {
            EXPECT_GT(s, 0.0);
            EXPECT_LT(s, 1.0);
        }
    }
}

TEST(GnnExplainer, SubgraphRestrictionMatchesFullGraph) {
    const auto d = tiny_ba(11);
    const auto& g = d.graphs.front();
    Rng rng(12);
    const auto p = ModelParams::init(Task::node_classification, g.feature_dim(), 8, 4, rng);
    for (std::size_t v : {0u, 7u, 26u, 30u, 39u}) {
        const auto a = gnn_explainer(p, g, {std::nullopt, v});
        const auto b = gnn_explainer_full_graph(p, g, {std::nullopt, v});
        ASSERT_EQ(a.scores.size(), b.scores.size());
        for (std::size_t e = 0; e < a.scores.size(); ++e) EXPECT_NEAR(a.scores[e], b.scores[e], 1e-9);
    }
}

TEST(GnnExplainer, PlantedMotifEdgesScoreHigher) {
    MotifGraphConfig mc;
    mc.count = 120;
    Rng rng(13);
    auto d = gen_motif_graphs(mc, rng.child(0));
    Rng sr = rng.child(1);
    d = split_dataset(d, {0.6, 0.2, 0.2}, sr);
    TrainConfig tc;
    tc.epochs = 60;
    tc.hidden = 16;
    const auto model = train(d, tc, AdvConfig{}, rng.child(2)).params;

    double motif_sum = 0.0, other_sum = 0.0;
    int graphs = 0, wins = 0;
    for (auto i : d.split.test) {
        const auto& g = d.graphs[i];
        if (g.labels[0] != 1) continue;
        const auto a = gnn_explainer(model, g);
        double ms = 0, os = 0;
        std::size_t mc_n = 0, oc_n = 0;
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            const bool in_motif = std::find(g.ground_truth.edges.begin(), g.ground_truth.edges.end(), g.edges[e]) !=
                                  g.ground_truth.edges.end();
            (in_motif ? ms : os) += a.scores[e];
            ++(in_motif ? mc_n : oc_n);
        }
        motif_sum += ms / static_cast<double>(mc_n);
        other_sum += os / static_cast<double>(oc_n);
        wins += ms / static_cast<double>(mc_n) > os / static_cast<double>(oc_n);
        ++graphs;
    }
    ASSERT_GT(graphs, 0);
    RecordProperty("graphs_where_motif_wins", std::to_string(wins) + "/" + std::to_string(graphs));
    EXPECT_GT(motif_sum / graphs, other_sum / graphs);
}

TEST(Explainers, ReadOnlyAndDeterministic) {
    const auto d = tiny_ba(14);
    const auto& g = d.graphs.front();
    Rng rng(15);
    const auto p = ModelParams::init(Task::node_classification, g.feature_dim(), 8, 4, rng);
    const auto fp = p.fingerprint();
    for (auto m : {ExplainMethod::vanilla_grad, ExplainMethod::grad_cam, ExplainMethod::gnn_explainer}) {
        const auto a = explain(m, p, g, {std::nullopt, 27});
        const auto b = explain(m, p, g, {std::nullopt, 27});
        EXPECT_EQ(a.scores, b.scores);
        EXPECT_EQ(a.model_fingerprint, hex64(fp));
        for (double s : a.scores) EXPECT_TRUE(std::isfinite(s));
    }
    EXPECT_EQ(p.fingerprint(), fp);
}

TEST(Explainers, NodeTaskNeedsTargetNode) {
    const auto d = tiny_ba(16);
    Rng rng(17);
    const auto p = ModelParams::init(Task::node_classification, d.graphs[0].feature_dim(), 8, 4, rng);
    EXPECT_THROW(vanilla_grad(p, d.graphs[0]), ExplainError);
    EXPECT_THROW(grad_cam(p, d.graphs[0], {std::nullopt, 10000}), ExplainError);
    EXPECT_THROW(vanilla_grad(p, d.graphs[0], {9, 3}), ExplainError);
}

TEST(Explainers, PermutationEquivariant) {
    Rng rng(18);
    for (int t = 0; t < 10; ++t) {
        const auto g = fixtures::random_graph(7, 3, rng, 0.5);
        const auto p = ModelParams::init(Task::graph_classification, 3, 5, 2, rng);
        std::vector<std::size_t> perm(7);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        const auto h = permuted(g, perm);
        for (auto m : {ExplainMethod::vanilla_grad, ExplainMethod::grad_cam}) {
            const auto a = explain(m, p, g);
            const auto b = explain(m, p, h);
            for (std::size_t v = 0; v < 7; ++v) EXPECT_NEAR(a.scores[v], b.scores[perm[v]], 1e-12);
        }
    }
}

TEST(Export, ColorRampEnds) {
    EXPECT_EQ(importance_color(0.0), "#ffc0cb");
    EXPECT_EQ(importance_color(1.0), "#ffff00");
    EXPECT_EQ(importance_color(7.0), "#ffff00");
}

TEST(Export, DotListsEveryNodeAndEdge) {
    Rng rng(19);
    const auto g = fixtures::random_graph(6, 2, rng, 0.5);
    const auto p = ModelParams::init(Task::graph_classification, 2, 4, 2, rng);
    const auto node_dot = attribution_to_dot(vanilla_grad(p, g), g, "g0");
    const auto edge_dot = attribution_to_dot(gnn_explainer(p, g), g, "g0");
    for (const auto& dot : {node_dot, edge_dot}) {
        EXPECT_EQ(dot.rfind("graph \"g0\" {", 0), 0u);
        EXPECT_EQ(static_cast<std::size_t>(std::count(dot.begin(), dot.end(), '-')) / 2, g.edges.size());
        EXPECT_EQ(dot.back(), '\n');
    }
    EXPECT_NE(node_dot.find("fillcolor=\"#ffff00\""), std::string::npos);
    EXPECT_NE(edge_dot.find("color=\"#ffff00\""), std::string::npos);
}

TEST(Export, JsonRecord) {
    Rng rng(20);
    const auto g = fixtures::random_graph(5, 2, rng, 0.6);
    const auto p = ModelParams::init(Task::graph_classification, 2, 4, 2, rng);
    const auto j = attribution_to_json(gnn_explainer(p, g), g, "graph3");
    EXPECT_EQ(j["graph_id"], "graph3");
    EXPECT_EQ(j["method"], "gnn_explainer");
    EXPECT_EQ(j["kind"], "edge");
    EXPECT_EQ(j["scores"].size(), g.edges.size());
    EXPECT_EQ(j["edges"].size(), g.edges.size());
    const auto v = attribution_to_json(vanilla_grad(p, g), g, "graph3");
    EXPECT_EQ(v["feature_scores"].size(), 5u);
    EXPECT_TRUE(v["target"].contains("class"));
}

TEST(ExplainerConfig, JsonAndValidation) {
    ExplainerConfig c;
    c.gnnx_iterations = 7;
    c.node_reduce = NodeReduce::l2;
    EXPECT_EQ(to_json(explainer_config_from_json(nlohmann::json::parse(to_json(c).dump()))), to_json(c));
    c.gnnx_size_reg = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_THROW(explainer_config_from_json(nlohmann::json::parse(R"({"gnnx_iterations": -1})")),
                 std::invalid_argument);
}
