#include "advgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace advgnn {

std::vector<double> average_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw MetricError(std::string(what) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
    }
    if (a.size() < 2) throw MetricError(std::string(what) + ": need at least 2 values");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw MetricError(std::string(what) + ": non-finite score");
    }
}

Correlation pearson_raw(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return {0.0, true};
    return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

std::vector<double> absolute(std::span<const double> v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]);
    return out;
}

bool constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

} // namespace

Correlation spearman(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "spearman");
    const auto x = absolute(a);
    const auto y = absolute(b);
    if (constant(x) || constant(y)) return {0.0, true};
    return pearson_raw(average_ranks(x), average_ranks(y));
}

Correlation pearson(std::span<const double> a, std::span<const double> b) {
    check_pair(a, b, "pearson");
    const auto x = absolute(a);
    const auto y = absolute(b);
    if (constant(x) || constant(y)) return {0.0, true};
    return pearson_raw(x, y);
}

std::vector<InstanceRef> split_instances(const Dataset& dataset, SplitPart part) {
    std::vector<InstanceRef> out;
    for (std::size_t i : dataset.indices(part)) {
        if (dataset.task == Task::graph_classification) out.push_back({i, std::nullopt});
        else out.push_back({0, i});
    }
    return out;
}

double accuracy(const ModelParams& params, const Dataset& dataset, SplitPart part) {
    const auto& idx = dataset.indices(part);
    if (idx.empty()) throw MetricError("accuracy: split '" + to_string(part) + "' is empty");
    std::size_t correct = 0;
    if (dataset.task == Task::graph_classification) {
        for (std::size_t i : idx) {
            const auto& g = dataset.graphs[i];
            correct += predicted_class(forward(params, g)) == g.labels[0];
        }
    } else {
        const auto& g = dataset.graphs.at(0);
        const auto cache = forward(params, g);
        for (std::size_t v : idx) correct += predicted_class(cache, v) == g.labels[v];
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

SanityCheckResult sanity_check(const ModelParams& trained, const Dataset& dataset, ExplainMethod method, int trials,
                               const Rng& rng, const SanityOptions& opts) {
    if (trials < 1) throw MetricError("sanity_check: trials must be >= 1");
    const auto instances = opts.instances.empty() ? split_instances(dataset, opts.part) : opts.instances;
    if (instances.empty()) throw MetricError("sanity_check: split '" + to_string(opts.part) + "' is empty");
    Explainer explainer = opts.explainer_override;
    if (!explainer) {
        explainer = [method, cfg = opts.explainer](const ModelParams& p, const Graph& g, const ExplainTarget& t) {
            return explain(method, p, g, t, cfg);
        };
    }
    const Randomizer randomizer =
        opts.randomizer ? opts.randomizer : Randomizer([](const ModelParams& p, Rng& r) { return randomize(p, r); });

    // The trained model's attribution is explained against its own
    // prediction; the randomized model explains the same class.
    std::vector<Attribution> reference;
    reference.reserve(instances.size());
    for (const auto& inst : instances) {
        reference.push_back(explainer(trained, dataset.graphs.at(inst.graph), {std::nullopt, inst.node}));
    }

    SanityCheckResult res;
    res.samples.reserve(instances.size() * static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        Rng trial_rng = rng.child(static_cast<std::uint64_t>(t));
        const ModelParams random_model = randomizer(trained, trial_rng);
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& inst = instances[i];
            const auto& ref = reference[i];
            const auto other = explainer(random_model, dataset.graphs.at(inst.graph), {ref.target_class, inst.node});
            const auto s = spearman(ref.scores, other.scores);
            const auto p = pearson(ref.scores, other.scores);
            res.samples.push_back({t, inst.id(), s.value, p.value, s.degenerate || p.degenerate});
        }
    }
    std::vector<double> sp, pe;
    for (const auto& s : res.samples) {
        sp.push_back(s.spearman);
        pe.push_back(s.pearson);
        res.degenerate_count += s.degenerate;
    }
    const auto ss = summarize(sp);
    res.mean_spearman = ss.mean;
    res.std_spearman = ss.stddev;
    res.mean_pearson = summarize(pe).mean;
    return res;
}

PrecisionResult precision_at_k(std::span<const double> scores, std::span<const std::size_t> truth) {
    if (truth.empty()) throw MetricError("precision: ground truth is empty");
    const std::size_t k = truth.size();
    if (k > scores.size()) throw MetricError("precision: ground truth larger than the scored set");
    for (std::size_t t : truth) {
        if (t >= scores.size()) throw MetricError("precision: ground-truth index out of range");
    }
    for (double s : scores) {
        if (!std::isfinite(s)) throw MetricError("precision: non-finite score");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<char> is_truth(scores.size(), 0);
    for (std::size_t t : truth) is_truth[t] = 1;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += is_truth[order[i]];
    return {static_cast<double>(hits) / static_cast<double>(k), k};
}

PrecisionResult precision_at_gt(const Attribution& attr, const Graph& g) {
    const GroundTruth* gt = &g.ground_truth;
    if (attr.target_node) {
        if (*attr.target_node >= g.node_ground_truth.size()) {
            throw MetricError("precision: graph has no per-node ground truth; generate a dataset with planted motifs");
        }
        gt = &g.node_ground_truth[*attr.target_node];
    }
    if (attr.kind == AttributionKind::edge) {
        if (gt->edges.empty()) {
            throw MetricError("precision: instance has no ground-truth edges; use a dataset with planted motifs");
        }
        std::vector<std::size_t> idx;
        for (const auto& e : gt->edges) {
            auto i = g.edge_index(e.u, e.v);
            if (!i) throw MetricError("precision: ground-truth edge not in graph");
            idx.push_back(*i);
        }
        return precision_at_k(attr.scores, idx);
    }
    if (gt->nodes.empty()) {
        throw MetricError("precision: instance has no ground-truth nodes; use a dataset with planted motifs");
    }
    return precision_at_k(attr.scores, gt->nodes);
}

Summary summarize(std::span<const double> v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

TTestResult paired_t_test_less(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw MetricError("t-test: samples must be paired");
    if (a.size() < 2) throw MetricError("t-test: need at least 2 pairs");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const auto s = summarize(d);
    TTestResult r;
    r.df = d.size() - 1;
    r.mean_difference = s.mean;
    if (s.stddev == 0.0) {
        r.t = s.mean < 0 ? -INFINITY : (s.mean > 0 ? INFINITY : 0.0);
        r.p = s.mean < 0 ? 0.0 : (s.mean > 0 ? 1.0 : 0.5);
        return r;
    }
    r.t = s.mean / (s.stddev / std::sqrt(static_cast<double>(d.size())));
    boost::math::students_t dist(static_cast<double>(r.df));
    r.p = boost::math::cdf(dist, r.t);
    return r;
}

} // namespace advgnn
