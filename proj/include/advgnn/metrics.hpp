#ifndef ADVGNN_METRICS_HPP
#define ADVGNN_METRICS_HPP

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgnn/explainers.hpp"
#include "advgnn/gcn.hpp"
#include "advgnn/graph.hpp"
#include "advgnn/rng.hpp"

namespace advgnn {

class MetricError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Correlation {
    double value = 0.0;
    /// Set when either input is constant; value is then 0.
    bool degenerate = false;
};

/// 1-based ranks, tied values sharing their average rank.
std::vector<double> average_ranks(std::span<const double> v);

/// Spearman rank correlation of |a| and |b|.
Correlation spearman(std::span<const double> a, std::span<const double> b);
/// Pearson correlation of |a| and |b|.
Correlation pearson(std::span<const double> a, std::span<const double> b);

/// Argmax-match fraction over a split part.
double accuracy(const ModelParams& params, const Dataset& dataset, SplitPart part);

/// One explained instance: a graph (graph task) or a node of graph 0.
struct InstanceRef {
    std::size_t graph = 0;
    std::optional<std::size_t> node;
    std::size_t id() const noexcept { return node ? *node : graph; }
};

std::vector<InstanceRef> split_instances(const Dataset& dataset, SplitPart part);

struct SanitySample {
    int trial = 0;
    std::size_t instance_id = 0;
    double spearman = 0.0;
    double pearson = 0.0;
    bool degenerate = false;
};

struct SanityCheckResult {
    std::vector<SanitySample> samples;
    double mean_spearman = 0.0;
    double std_spearman = 0.0;
    double mean_pearson = 0.0;
    std::size_t degenerate_count = 0;
};

using Explainer = std::function<Attribution(const ModelParams&, const Graph&, const ExplainTarget&)>;
using Randomizer = std::function<ModelParams(const ModelParams&, Rng&)>;

struct SanityOptions {
    SplitPart part = SplitPart::test;
    ExplainerConfig explainer{};
    /// Replaces the built-in method when set.
    Explainer explainer_override;
    /// Defaults to randomize(); trial t draws from rng.child(t).
    Randomizer randomizer;
    /// Explicit instance list; defaults to every instance of `part`.
    std::vector<InstanceRef> instances;
};

/// Correlates the trained model's attributions with those of freshly
/// randomized models of the same architecture; trials x instances samples.
SanityCheckResult sanity_check(const ModelParams& trained, const Dataset& dataset, ExplainMethod method, int trials,
                               const Rng& rng, const SanityOptions& opts = {});

/// Fraction of the k = |ground truth| highest-scored items that are in the
/// ground truth; ties go to the lower index.
struct PrecisionResult {
    double precision = 0.0;
    std::size_t k = 0;
};

PrecisionResult precision_at_k(std::span<const double> scores, std::span<const std::size_t> truth);
/// Uses node ground truth for node attributions and edge ground truth for
/// edge attributions; node-task targets use that node's ground truth.
PrecisionResult precision_at_gt(const Attribution& attr, const Graph& g);

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation, 0 for n < 2
    std::size_t n = 0;
};
Summary summarize(std::span<const double> v);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    std::size_t df = 0;
    double mean_difference = 0.0;
};

/// Paired t-test of H1: mean(a - b) < 0.
TTestResult paired_t_test_less(std::span<const double> a, std::span<const double> b);

} // namespace advgnn

#endif // ADVGNN_METRICS_HPP
