#include <gtest/gtest.h>

#include <cmath>

#include "advgnn/graph.hpp"
#include "test_support.hpp"

using namespace advgnn;

namespace {

Graph path3() {
    Graph g;
    g.num_nodes = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.features = Matrix(3, 1, 1.0);
    g.labels = {0};
    return g;
}

Dataset labelled_graphs(std::size_t count, std::size_t classes) {
    Dataset d;
    d.num_classes = classes;
    for (std::size_t i = 0; i < count; ++i) {
        Graph g;
        g.num_nodes = 1;
        g.features = Matrix(1, 1, 0.0);
        g.labels = {static_cast<int>(i % classes)};
        d.graphs.push_back(g);
    }
    return d;
}

double spectral_radius(const Matrix& a) {
    std::vector<double> x(a.rows(), 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
        std::vector<double> y(a.rows(), 0.0);
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
        double norm = 0.0;
        for (double v : y) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) x[i] = y[i] / norm;
        lambda = norm;
    }
    return lambda;
}

} // namespace

TEST(NormalizeAdjacency, IsolatedNode) {
    Graph g;
    g.num_nodes = 1;
    g.features = Matrix(1, 1);
    EXPECT_EQ(normalize_adjacency(g), (Matrix{{1.0}}));
}

TEST(NormalizeAdjacency, SingleEdge) {
    Graph g;
    g.num_nodes = 2;
    g.edges = {{0, 1}};
    g.features = Matrix(2, 1);
    const auto a = normalize_adjacency(g);
    for (double v : a.values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(NormalizeAdjacency, PathMatchesDefinition) {
    const auto g = path3();
    // A + I and its degrees, written out directly.
    const double at[3][3] = {{1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
    const double deg[3] = {2, 3, 2};
    const auto a = normalize_adjacency(g);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), at[i][j] / std::sqrt(deg[i] * deg[j]), 1e-15);
}

TEST(NormalizeAdjacency, SymmetricWithBoundedSpectrum) {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
        const auto g = fixtures::random_graph(2 + rng.below(12), 2, rng, rng.uniform(0.0, 0.8));
        const auto a = normalize_adjacency(g);
        for (std::size_t i = 0; i < a.rows(); ++i) {
            EXPECT_GT(a(i, i), 0.0);
            for (std::size_t j = 0; j < a.cols(); ++j) {
                EXPECT_NEAR(a(i, j), a(j, i), 1e-12);
                EXPECT_GE(a(i, j), 0.0);
            }
        }
        EXPECT_LE(spectral_radius(a), 1.0 + 1e-9);
    }
}

TEST(GraphValidate, RejectsBadStructure) {
    auto g = path3();
    g.edges.push_back({0, 3});
    EXPECT_THROW(g.validate(), GraphError);
    g = path3();
    g.edges.push_back({0, 1});
    EXPECT_THROW(g.validate(), GraphError);
    g = path3();
    g.edges.push_back({1, 1});
    EXPECT_THROW(g.validate(), GraphError);
    g = path3();
    g.features = Matrix(2, 1);
    EXPECT_THROW(g.validate(), GraphError);
    EXPECT_NO_THROW(path3().validate());
}

TEST(SplitDataset, TenGraphsEightOneOne) {
    Rng rng(1);
    const auto d = split_dataset(labelled_graphs(10, 1), {0.8, 0.1, 0.1}, rng);
    EXPECT_EQ(d.split.train.size(), 8u);
    EXPECT_EQ(d.split.val.size(), 1u);
    EXPECT_EQ(d.split.test.size(), 1u);
    EXPECT_NO_THROW(d.validate());
}

TEST(SplitDataset, TotalsFollowLargestRemainderAcrossClasses) {
    Rng rng(1);
    const auto d = split_dataset(labelled_graphs(10, 2), {0.8, 0.1, 0.1}, rng);
    EXPECT_EQ(d.split.train.size(), 8u);
    EXPECT_EQ(d.split.val.size(), 1u);
    EXPECT_EQ(d.split.test.size(), 1u);
}

TEST(SplitDataset, DeterministicForSeed) {
    Rng a(5), b(5);
    const auto base = labelled_graphs(37, 3);
    EXPECT_EQ(split_dataset(base, {0.7, 0.15, 0.15}, a).split, split_dataset(base, {0.7, 0.15, 0.15}, b).split);
}

TEST(SplitDataset, StratifiedCountsOnBalancedData) {
    Rng rng(3);
    const auto d = split_dataset(labelled_graphs(100, 2), {0.6, 0.2, 0.2}, rng);
    // Counting oracle: 50 per class, so 30/10/10 per class.
    for (const auto* part : {&d.split.train, &d.split.val, &d.split.test}) {
        int ones = 0;
        for (auto i : *part) ones += d.graphs[i].labels[0];
        const int zeros = static_cast<int>(part->size()) - ones;
        EXPECT_LE(std::abs(ones - zeros), 1);
    }
    EXPECT_EQ(d.split.train.size(), 60u);
}

TEST(SplitDataset, SmallClassWarns) {
    Rng rng(3);
    auto d = labelled_graphs(20, 1);
    d.num_classes = 2;
    d.graphs[0].labels = {1};
    const auto out = split_dataset(d, {0.8, 0.1, 0.1}, rng);
    EXPECT_FALSE(out.split.warnings.empty());
    EXPECT_NO_THROW(out.validate());
}

TEST(SplitDataset, EveryClassInEverySplitWhenFeasible) {
    Rng rng(9);
    const auto d = split_dataset(labelled_graphs(60, 3), {0.8, 0.1, 0.1}, rng);
    for (const auto* part : {&d.split.train, &d.split.val, &d.split.test}) {
        std::set<int> seen;
        for (auto i : *part) seen.insert(d.graphs[i].labels[0]);
        EXPECT_EQ(seen.size(), 3u);
    }
}

TEST(SplitDataset, RejectsBadFractions) {
    Rng rng(1);
    EXPECT_THROW(split_dataset(labelled_graphs(10, 1), {0.5, 0.5, 0.5}, rng), std::invalid_argument);
    EXPECT_THROW(split_dataset(labelled_graphs(10, 1), {1.0, 0.0, 0.0}, rng), std::invalid_argument);
}

TEST(DatasetFormat, RoundTripIsIdentity) {
    Rng rng(21);
    for (int t = 0; t < 10; ++t) {
        Dataset d;
        d.num_classes = 3;
        for (int i = 0; i < 6; ++i) {
            auto g = fixtures::random_graph(3 + rng.below(6), 4, rng);
            g.labels = {static_cast<int>(rng.below(3))};
            if (!g.edges.empty()) g.ground_truth.edges = {g.edges.front()};
            g.ground_truth.nodes = {0, 1};
            d.graphs.push_back(g);
        }
        d = split_dataset(d, {0.5, 0.25, 0.25}, rng);
        d.split.warnings.clear();
        d.generator = {{"kind", "test"}, {"seed", t}};
        const auto back = dataset_from_json(nlohmann::json::parse(dataset_to_json(d).dump()));
        EXPECT_EQ(back, d);
    }
}

TEST(DatasetFormat, NodeTaskRoundTrip) {
    Rng rng(4);
    Dataset d;
    d.task = Task::node_classification;
    d.num_classes = 2;
    auto g = fixtures::random_graph(6, 2, rng, 0.6);
    g.labels = {0, 1, 0, 1, 1, 0};
    g.node_ground_truth.resize(6);
    g.node_ground_truth[1].edges = {g.edges.front()};
    g.node_ground_truth[1].nodes = {1};
    d.graphs.push_back(g);
    const auto back = dataset_from_json(nlohmann::json::parse(dataset_to_json(d).dump()));
    EXPECT_EQ(back, d);
}

TEST(DatasetFormat, MalformedInputRejected) {
    EXPECT_THROW(dataset_from_json(nlohmann::json::parse(R"({"task":"graph_classification"})")), GraphError);
    EXPECT_THROW(dataset_from_json(nlohmann::json::parse(
                     R"({"task":"graph_classification","num_classes":2,"graphs":[{"num_nodes":2,"edges":[[0,0]],"features":[[1],[1]],"label":0}]})")),
                 GraphError);
}
