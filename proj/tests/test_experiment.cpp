#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "advgnn/experiment.hpp"
#include "advgnn/io.hpp"

using namespace advgnn;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.generator.motif_graphs.count = 100;
    c.split = SplitFractions{0.6, 0.2, 0.2};
    c.train.epochs = 15;
    c.train.hidden = 8;
    c.train.replicate_count = 2;
    c.epsilons = {0.05};
    c.layers = {PerturbLayer::x0};
    c.explainers = {ExplainMethod::vanilla_grad};
    c.trials = 3;
    c.sweep_trials = 1;
    c.master_seed = 11;
    c.dot_samples = 1;
    return c;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const CellResult& cell(const ExperimentReport& r, const std::string& id) {
    const auto it = std::find_if(r.cells.begin(), r.cells.end(), [&](const CellResult& c) { return c.id == id; });
    if (it == r.cells.end()) throw std::runtime_error("no cell " + id);
    return *it;
}

} // namespace

TEST(ExperimentConfig, ParseErrorsNameTheField) {
    auto expect_field = [](const std::string& text, const std::string& field) {
        try {
            experiment_config_from_json(nlohmann::json::parse(text));
            FAIL() << text;
        } catch (const std::invalid_argument& e) {
            EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
        }
    };
    expect_field(R"({"trials": 0})", "trials");
    expect_field(R"({"trails": 5})", "trails");
    expect_field(R"({"train": {"learning_rate": -1}})", "learning_rate");
    expect_field(R"({"adversarial": {"epsilons": [-0.1]}})", "epsilons");
    expect_field(R"({"adversarial": {"layers": ["X7"]}})", "X7");
    expect_field(R"({"explainers": ["Occlusion"]})", "Occlusion");
    expect_field(R"({"generator": {"kind": "motif_graphs", "class_balance": 1.5}})", "class_balance");
    expect_field(R"({"split": [0.5, 0.2, 0.2]})", "split");
}

TEST(ExperimentConfig, EchoRoundTrips) {
    auto c = small_config();
    c.explainer.gnnx_iterations = 17;
    const auto j = to_json(c);
    const auto back = experiment_config_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(ExperimentConfig, TaskDefaultMethods) {
    ExperimentConfig c;
    EXPECT_EQ(c.methods(Task::graph_classification),
              (std::vector<ExplainMethod>{ExplainMethod::vanilla_grad, ExplainMethod::grad_cam}));
    EXPECT_EQ(c.methods(Task::node_classification), std::vector<ExplainMethod>{ExplainMethod::gnn_explainer});
}

TEST(Experiment, BaselineOnlyGridHasOneCell) {
    auto c = small_config();
    c.layers.clear();
    c.train.replicate_count = 1;
    const auto d = prepare_dataset(c);
    const auto r = run_experiment(c, d);
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_EQ(r.cells[0].id, "baseline_VG");
    EXPECT_TRUE(r.comparisons.empty());
    EXPECT_TRUE(r.complete());
}

TEST(Experiment, SampleCountsAndSingleTestEvaluation) {
    const auto c = small_config();
    const auto d = prepare_dataset(c);
    ASSERT_EQ(d.split.test.size(), 20u);
    const auto r = run_experiment(c, d);
    ASSERT_EQ(r.cells.size(), 2u);
    for (const auto& x : r.cells) {
        EXPECT_FALSE(x.failed) << x.diagnostics;
        const auto n = std::count_if(x.samples.begin(), x.samples.end(),
                                     [](const MetricSample& s) { return s.metric == "spearman"; });
        EXPECT_EQ(n, 2 * 3 * 20);
        EXPECT_EQ(x.replicates.size(), 2u);
        EXPECT_EQ(x.test_evaluations, 1);
    }
    const auto& adv = cell(r, "adv_X0_VG");
    ASSERT_TRUE(adv.chosen_epsilon);
    EXPECT_EQ(*adv.chosen_epsilon, 0.05);
    ASSERT_EQ(r.comparisons.size(), 1u);
    EXPECT_EQ(r.comparisons[0].baseline, "baseline_VG");

    const auto summary = r.summary_csv();
    EXPECT_EQ(summary.substr(0, summary.find('\n')),
              "adversarial_training,perturbation_layer,explanation_type,average_correlation,std_correlation,"
              "average_pearson,test_accuracy,chosen_epsilon,replicates,status");
    EXPECT_NE(summary.find("\nno,none,VG,"), std::string::npos);
    EXPECT_NE(summary.find("\nyes,X0,VG,"), std::string::npos);
}

TEST(Experiment, DeterministicForSeed) {
    auto c = small_config();
    c.train.replicate_count = 1;
    const auto d = prepare_dataset(c);
    const auto a = run_experiment(c, d);
    const auto b = run_experiment(c, d);
    EXPECT_EQ(a.summary_csv(), b.summary_csv());
    EXPECT_EQ(a.samples_csv(), b.samples_csv());
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Experiment, FailedCellDoesNotStopTheRest) {
    auto c = small_config();
    c.train.replicate_count = 1;
    c.epsilons = {1e308};
    c.layers = {PerturbLayer::x0, PerturbLayer::penultimate};
    const auto d = prepare_dataset(c);
    const auto r = run_experiment(c, d);
    ASSERT_EQ(r.cells.size(), 3u);
    EXPECT_FALSE(cell(r, "baseline_VG").failed);
    const auto& bad = cell(r, "adv_X0_VG");
    EXPECT_TRUE(bad.failed);
    EXPECT_FALSE(bad.diagnostics.empty());
    EXPECT_FALSE(r.complete());
    EXPECT_NE(r.summary_csv().find("failed"), std::string::npos);
}

TEST(Experiment, WritesReportFiles) {
    auto c = small_config();
    c.train.replicate_count = 1;
    c.out = fs::temp_directory_path() / ("advgnn_exp_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(c.out);
    const auto d = prepare_dataset(c);
    const auto r = run_experiment(c, d);
    write_report(r);
    for (const char* f : {"summary.csv", "samples.csv", "replicates.csv", "sweep.csv", "report.json"})
        EXPECT_TRUE(fs::exists(c.out / f)) << f;
    EXPECT_EQ(read_file(c.out / "summary.csv"), r.summary_csv());
    const auto j = read_json(c.out / "report.json");
    EXPECT_EQ(experiment_config_from_json(j["config"]).master_seed, 11u);
    std::size_t dots = 0;
    for (const auto& e : fs::directory_iterator(c.out / "dot")) dots += e.path().extension() == ".dot";
    EXPECT_EQ(dots, 2u);
    fs::remove_all(c.out);
}

TEST(Experiment, NodeTaskReportsPrecisionAndBaselines) {
    ExperimentConfig c;
    c.generator.kind = GeneratorSpec::Kind::ba_shapes;
    c.generator.ba_shapes.base_nodes = 40;
    c.generator.ba_shapes.motif_count = 8;
    c.train.epochs = 20;
    c.train.hidden = 8;
    c.train.replicate_count = 1;
    c.layers.clear();
    c.explainer.gnnx_iterations = 10;
    c.explain_nodes = 5;
    c.master_seed = 3;
    const auto d = prepare_dataset(c);
    const auto r = run_experiment(c, d);
    ASSERT_EQ(r.cells.size(), 1u);
    EXPECT_EQ(r.cells[0].id, "baseline_GNNX");
    EXPECT_EQ(r.cells[0].metric, "precision");
    ASSERT_TRUE(r.random_precision_baseline);
    EXPECT_GT(*r.random_precision_baseline, 0.0);
    EXPECT_LT(*r.random_precision_baseline, 1.0);
    EXPECT_LE(r.cells[0].samples.size(), 5u);
    EXPECT_GT(r.cells[0].samples.size(), 0u);
}
