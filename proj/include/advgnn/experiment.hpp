#ifndef ADVGNN_EXPERIMENT_HPP
#define ADVGNN_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/adversarial.hpp"
#include "advgnn/explainers.hpp"
#include "advgnn/graph.hpp"
#include "advgnn/metrics.hpp"
#include "advgnn/synth.hpp"

namespace advgnn {

struct GeneratorSpec {
    enum class Kind { motif_graphs, ba_shapes };
    Kind kind = Kind::motif_graphs;
    MotifGraphConfig motif_graphs{};
    BaShapesConfig ba_shapes{};

    Task task() const noexcept {
        return kind == Kind::motif_graphs ? Task::graph_classification : Task::node_classification;
    }
};

nlohmann::ordered_json to_json(const GeneratorSpec& g);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
Dataset generate(const GeneratorSpec& spec, const Rng& rng);

/// Default fractions: 0.8/0.1/0.1 for graph tasks, 0.6/0.2/0.2 for node tasks.
SplitFractions default_split(Task task);

struct ExperimentConfig {
    /// Checked against the dataset when set.
    std::optional<Task> task;
    std::optional<std::filesystem::path> dataset_path;
    GeneratorSpec generator{};
    std::optional<SplitFractions> split;
    TrainConfig train{};
    /// Shared settings for every adversarial cell; epsilon comes from the sweep.
    AdvConfig adversarial{};
    std::vector<double> epsilons{0.05, 0.1, 0.2};
    std::vector<PerturbLayer> layers{PerturbLayer::x0, PerturbLayer::penultimate};
    bool include_baseline = true;
    /// Empty means the task default: VG and GC for graphs, GNNX for nodes.
    std::vector<ExplainMethod> explainers;
    ExplainerConfig explainer{};
    int trials = 50;
    int sweep_trials = 5;
    std::uint64_t master_seed = 0;
    std::filesystem::path out = "results";
    std::size_t dot_samples = 3;
    /// Explained nodes per replicate (node task).
    std::size_t explain_nodes = 50;
    double max_accuracy_drop = 0.02;

    std::vector<ExplainMethod> methods(Task task) const;
    void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& cfg);
/// Unknown keys and invalid values raise ConfigError naming the field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Loads the dataset file or generates one from master.child(0), then splits it
/// with master.child(1) unless the file already carries a split.
Dataset prepare_dataset(const ExperimentConfig& cfg);

struct SweepPoint {
    double epsilon = 0.0;
    double val_accuracy = 0.0;
    double val_metric = 0.0;
    bool feasible = false;
    std::string error;
};

struct ReplicateResult {
    int replicate = 0;
    double val_accuracy = 0.0;
    double test_accuracy = 0.0;
    double metric_mean = 0.0;
    double pearson_mean = 0.0;
    std::size_t degenerate = 0;
    std::string model_fingerprint;
};

struct MetricSample {
    std::string model_id;
    int trial = 0;
    std::size_t instance_id = 0;
    std::string metric;
    double value = 0.0;
};

struct CellResult {
    std::string id;
    bool adversarial = false;
    PerturbLayer layer = PerturbLayer::x0;
    ExplainMethod method = ExplainMethod::vanilla_grad;
    /// "correlation" (randomization check) or "precision" (ground truth).
    std::string metric;
    bool failed = false;
    std::string diagnostics;
    std::optional<double> chosen_epsilon;
    std::vector<SweepPoint> sweep;
    std::vector<ReplicateResult> replicates;
    std::vector<MetricSample> samples;
    double mean = 0.0;
    double stddev = 0.0;
    double pearson_mean = 0.0;
    double test_accuracy_mean = 0.0;
    /// Number of times test-split metrics were computed; 1 for a finished cell.
    int test_evaluations = 0;
    /// (file name, DOT text) for sampled test instances of replicate 0.
    std::vector<std::pair<std::string, std::string>> renderings;
};

struct Comparison {
    std::string cell;
    std::string baseline;
    TTestResult test;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string dataset_summary;
    std::vector<CellResult> cells;
    std::vector<Comparison> comparisons;
    /// Random-scoring expectation of precision (mean m/E over explained instances).
    std::optional<double> random_precision_baseline;
    /// Same, with E restricted to each target's two-hop computation graph.
    std::optional<double> random_precision_local_baseline;

    bool complete() const;
    nlohmann::ordered_json to_json() const;
    /// Table columns: adversarial_training, perturbation_layer, explanation_type,
    /// then average_correlation or average_precision and dispersion.
    std::string summary_csv() const;
    std::string samples_csv() const;
    std::string replicates_csv() const;
    std::string sweep_csv() const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Runs every grid cell: epsilon sweep on validation, replicate training at
/// the chosen epsilon, one evaluation on the test split. Failed cells are
/// flagged and the run continues.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& dataset, const ProgressFn& progress = {});

/// Writes summary.csv, samples.csv, replicates.csv, sweep.csv, report.json and
/// dot/*.dot under cfg.out.
void write_report(const ExperimentReport& report, const ProgressFn& progress = {});

} // namespace advgnn

#endif // ADVGNN_EXPERIMENT_HPP
