#include "advgnn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "advgnn/io.hpp"

namespace advgnn {

nlohmann::ordered_json to_json(const GeneratorSpec& g) {
    nlohmann::ordered_json j;
    if (g.kind == GeneratorSpec::Kind::motif_graphs) {
        j["kind"] = "motif_graphs";
        const auto body = to_json(g.motif_graphs);
        for (const auto& [k, v] : body.items()) j[k] = v;
    } else {
        j["kind"] = "ba_shapes";
        const auto body = to_json(g.ba_shapes);
        for (const auto& [k, v] : body.items()) j[k] = v;
    }
    return j;
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("generator must be an object");
    GeneratorSpec g;
    const std::string kind = j.value("kind", "motif_graphs");
    nlohmann::json rest = j;
    rest.erase("kind");
    try {
        if (kind == "motif_graphs") {
            g.kind = GeneratorSpec::Kind::motif_graphs;
            g.motif_graphs = motif_graph_config_from_json(rest);
        } else if (kind == "ba_shapes") {
            g.kind = GeneratorSpec::Kind::ba_shapes;
            g.ba_shapes = ba_shapes_config_from_json(rest);
        } else {
            throw ConfigError("generator.kind must be motif_graphs or ba_shapes, got '" + kind + "'");
        }
    } catch (const GeneratorError& e) {
        throw ConfigError(std::string("generator: ") + e.what());
    }
    return g;
}

Dataset generate(const GeneratorSpec& spec, const Rng& rng) {
    if (spec.kind == GeneratorSpec::Kind::motif_graphs) return gen_motif_graphs(spec.motif_graphs, rng);
    return gen_ba_shapes(spec.ba_shapes, rng);
}

SplitFractions default_split(Task task) {
    return task == Task::graph_classification ? SplitFractions{0.8, 0.1, 0.1} : SplitFractions{0.6, 0.2, 0.2};
}

std::vector<ExplainMethod> ExperimentConfig::methods(Task t) const {
    if (!explainers.empty()) return explainers;
    if (t == Task::graph_classification) return {ExplainMethod::vanilla_grad, ExplainMethod::grad_cam};
    return {ExplainMethod::gnn_explainer};
}

void ExperimentConfig::validate() const {
    train.validate();
    adversarial.validate();
    explainer.validate();
    if (!include_baseline && (layers.empty() || epsilons.empty())) throw ConfigError("the experiment grid is empty");
    if (!layers.empty() && epsilons.empty()) throw ConfigError("adversarial.epsilons must not be empty");
    for (double e : epsilons) {
        if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("adversarial.epsilons entries must be >= 0");
    }
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (sweep_trials < 1) throw ConfigError("sweep_trials must be >= 1");
    if (explain_nodes < 1) throw ConfigError("explain_nodes must be >= 1");
    if (!(max_accuracy_drop >= 0.0 && max_accuracy_drop <= 1.0)) {
        throw ConfigError("max_accuracy_drop must lie in [0, 1]");
    }
    if (split) {
        double s = 0.0;
        for (double f : *split) {
            if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
            s += f;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
    }
    if (out.empty()) throw ConfigError("out must name a directory");
}

nlohmann::ordered_json to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    if (cfg.task) j["task"] = to_string(*cfg.task);
    if (cfg.dataset_path) j["dataset"] = cfg.dataset_path->string();
    else j["generator"] = to_json(cfg.generator);
    if (cfg.split) j["split"] = *cfg.split;
    auto train = to_json(cfg.train);
    train.erase("replicate_count");
    train.erase("master_seed");
    j["train"] = train;
    auto adv = to_json(cfg.adversarial);
    adv.erase("enabled");
    adv.erase("epsilon");
    adv.erase("layer");
    adv["epsilons"] = cfg.epsilons;
    auto layers = nlohmann::ordered_json::array();
    for (auto l : cfg.layers) layers.push_back(to_string(l));
    adv["layers"] = layers;
    adv["include_baseline"] = cfg.include_baseline;
    j["adversarial"] = adv;
    auto ex = nlohmann::ordered_json::array();
    for (auto m : cfg.explainers) ex.push_back(short_name(m));
    j["explainers"] = ex;
    j["explainer"] = to_json(cfg.explainer);
    j["trials"] = cfg.trials;
    j["sweep_trials"] = cfg.sweep_trials;
    j["replicates"] = cfg.train.replicate_count;
    j["master_seed"] = cfg.master_seed;
    j["out"] = cfg.out.string();
    j["dot_samples"] = cfg.dot_samples;
    j["explain_nodes"] = cfg.explain_nodes;
    j["max_accuracy_drop"] = cfg.max_accuracy_drop;
    return j;
}

namespace {

template <class T>
T get(const nlohmann::json& v, const std::string& name) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(name + " has the wrong type");
    }
}

} // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base) {
    if (!j.is_object()) throw ConfigError("experiment config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "task") {
            try {
                base.task = task_from_string(get<std::string>(v, k));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("task: ") + e.what());
            }
        } else if (k == "dataset") base.dataset_path = get<std::string>(v, k);
        else if (k == "generator") base.generator = generator_spec_from_json(v);
        else if (k == "split") {
            const auto f = get<std::vector<double>>(v, k);
            if (f.size() != 3) throw ConfigError("split must list three fractions");
            base.split = SplitFractions{f[0], f[1], f[2]};
        } else if (k == "train") {
            const int reps = base.train.replicate_count;
            base.train = train_config_from_json(v, base.train);
            base.train.replicate_count = reps;
        } else if (k == "adversarial") {
            if (!v.is_object()) throw ConfigError("adversarial must be an object");
            nlohmann::json rest = v;
            if (v.contains("epsilons")) base.epsilons = get<std::vector<double>>(v["epsilons"], "adversarial.epsilons");
            if (v.contains("layers")) {
                base.layers.clear();
                for (const auto& l : v["layers"]) base.layers.push_back(perturb_layer_from_string(get<std::string>(l, "adversarial.layers")));
            }
            if (v.contains("include_baseline")) base.include_baseline = get<bool>(v["include_baseline"], "adversarial.include_baseline");
            for (const char* key : {"epsilons", "layers", "include_baseline"}) rest.erase(key);
            for (const char* key : {"enabled", "epsilon", "layer"}) {
                if (rest.contains(key)) throw ConfigError(std::string("adversarial.") + key + " is set by the grid");
            }
            base.adversarial = adv_config_from_json(rest, base.adversarial);
        } else if (k == "explainers") {
            base.explainers.clear();
            for (const auto& m : v) {
                try {
                    base.explainers.push_back(explain_method_from_string(get<std::string>(m, "explainers")));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(std::string("explainers: ") + e.what());
                }
            }
        } else if (k == "explainer") {
            try {
                base.explainer = explainer_config_from_json(v, base.explainer);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("explainer: ") + e.what());
            }
        } else if (k == "trials") base.trials = get<int>(v, k);
        else if (k == "sweep_trials") base.sweep_trials = get<int>(v, k);
        else if (k == "replicates") base.train.replicate_count = get<int>(v, k);
        else if (k == "master_seed") base.master_seed = get<std::uint64_t>(v, k);
        else if (k == "out") base.out = get<std::string>(v, k);
        else if (k == "dot_samples") base.dot_samples = get<std::size_t>(v, k);
        else if (k == "explain_nodes") base.explain_nodes = get<std::size_t>(v, k);
        else if (k == "max_accuracy_drop") base.max_accuracy_drop = get<double>(v, k);
        else throw ConfigError("unknown config key '" + k + "'");
    }
    base.train.master_seed = base.master_seed;
    base.validate();
    return base;
}

Dataset prepare_dataset(const ExperimentConfig& cfg) {
    const Rng master(cfg.master_seed);
    Dataset d;
    if (cfg.dataset_path) {
        d = load_dataset(*cfg.dataset_path);
    } else {
        d = generate(cfg.generator, master.child(0));
    }
    if (cfg.task && *cfg.task != d.task) {
        throw ConfigError("task is " + to_string(*cfg.task) + " but the dataset is " + to_string(d.task));
    }
    if (d.split.empty()) {
        Rng split_rng = master.child(1);
        d = split_dataset(d, cfg.split.value_or(default_split(d.task)), split_rng);
    }
    return d;
}

namespace {

std::string cell_id(bool adv, PerturbLayer layer, ExplainMethod m) {
    return (adv ? "adv_" + to_string(layer) : std::string("baseline")) + "_" + short_name(m);
}

struct ModelKey {
    bool adv;
    int layer;
    double epsilon;
    int slot;
    auto operator<=>(const ModelKey&) const = default;
};

struct TrainedModel {
    std::optional<TrainResult> result;
    std::string error;
};

class Runner {
public:
    Runner(const ExperimentConfig& cfg, const Dataset& d, const ProgressFn& progress)
        : cfg_(cfg), d_(d), master_(cfg.master_seed), progress_(progress) {
        task_ = d.task;
        metric_ = task_ == Task::graph_classification ? "correlation" : "precision";
        if (task_ == Task::node_classification) {
            test_nodes_ = motif_nodes(SplitPart::test, 2);
            val_nodes_ = motif_nodes(SplitPart::val, 3);
        }
    }

    ExperimentReport run() {
        ExperimentReport rep;
        rep.config = cfg_;
        rep.dataset_summary = summary();
        const auto methods = cfg_.methods(task_);
        note("baseline reference model");
        const auto& base_ref = model(false, PerturbLayer::x0, 0.0, -1);
        base_val_acc_ = base_ref.result ? std::optional(base_ref.result->log.best_val_accuracy) : std::nullopt;

        for (auto m : methods) {
            if (cfg_.include_baseline) rep.cells.push_back(run_cell(false, PerturbLayer::x0, m));
        }
        for (auto layer : cfg_.layers)
            for (auto m : methods) rep.cells.push_back(run_cell(true, layer, m));

        for (const auto& c : rep.cells) {
            if (!c.adversarial || c.failed) continue;
            const auto base_id = cell_id(false, PerturbLayer::x0, c.method);
            for (const auto& b : rep.cells) {
                if (b.id != base_id || b.failed || b.replicates.size() != c.replicates.size() || c.replicates.size() < 2)
                    continue;
                std::vector<double> a, z;
                for (std::size_t r = 0; r < c.replicates.size(); ++r) {
                    a.push_back(c.replicates[r].metric_mean);
                    z.push_back(b.replicates[r].metric_mean);
                }
                rep.comparisons.push_back({c.id, b.id, paired_t_test_less(a, z)});
            }
        }
        if (task_ == Task::node_classification && !test_nodes_.empty()) {
            const auto& g = d_.graphs.front();
            double global = 0.0, local = 0.0;
            for (const auto& inst : test_nodes_) {
                const double m = static_cast<double>(g.node_ground_truth[*inst.node].edges.size());
                global += m / static_cast<double>(g.edges.size());
                local += m / static_cast<double>(ball_edges(*inst.node));
            }
            rep.random_precision_baseline = global / static_cast<double>(test_nodes_.size());
            rep.random_precision_local_baseline = local / static_cast<double>(test_nodes_.size());
        }
        return rep;
    }

private:
    void note(const std::string& s) const {
        if (progress_) progress_(s);
    }

    std::string summary() const {
        std::ostringstream os;
        os << to_string(d_.task) << ", " << d_.graphs.size() << " graph(s), " << d_.instance_count()
           << " instances, split " << d_.split.train.size() << "/" << d_.split.val.size() << "/"
           << d_.split.test.size();
        return os.str();
    }

    std::vector<InstanceRef> motif_nodes(SplitPart part, std::uint64_t stream) const {
        const auto& g = d_.graphs.front();
        std::vector<InstanceRef> out;
        for (std::size_t v : d_.indices(part)) {
            if (v < g.node_ground_truth.size() && !g.node_ground_truth[v].edges.empty()) out.push_back({0, v});
        }
        Rng r = master_.child(stream);
        r.shuffle(out);
        if (out.size() > cfg_.explain_nodes) out.resize(cfg_.explain_nodes);
        std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return *a.node < *b.node; });
        return out;
    }

    std::size_t ball_edges(std::size_t v) const {
        const auto& g = d_.graphs.front();
        if (lists_.empty()) lists_ = g.adjacency_lists();
        std::vector<char> in(g.num_nodes, 0);
        in[v] = 1;
        for (auto u : lists_[v]) {
            in[u] = 1;
            for (auto w : lists_[u]) in[w] = 1;
        }
        std::size_t count = 0;
        for (const auto& e : g.edges) count += in[e.u] && in[e.v];
        return std::max<std::size_t>(count, 1);
    }

    const TrainedModel& model(bool adv, PerturbLayer layer, double eps, int slot) {
        const ModelKey key{adv, adv ? injection_index(layer) : -1, adv ? eps : 0.0, slot};
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        AdvConfig a = cfg_.adversarial;
        a.enabled = adv;
        a.layer = layer;
        a.epsilon = adv ? eps : 0.0;
        const Rng rng = master_.child(slot < 0 ? 99 : 100 + static_cast<std::uint64_t>(slot));
        TrainedModel tm;
        try {
            tm.result = train(d_, cfg_.train, a, rng);
        } catch (const std::exception& e) {
            tm.error = e.what();
        }
        return cache_.emplace(key, std::move(tm)).first->second;
    }

    std::vector<double> precisions(const ModelParams& p, ExplainMethod m, const std::vector<InstanceRef>& inst) const {
        std::vector<double> out;
        for (const auto& i : inst) {
            const auto& g = d_.graphs.at(i.graph);
            out.push_back(precision_at_gt(explain(m, p, g, {std::nullopt, i.node}, cfg_.explainer), g).precision);
        }
        return out;
    }

    std::vector<InstanceRef> graph_instances(SplitPart part) const {
        if (task_ == Task::node_classification) return part == SplitPart::test ? test_nodes_ : val_nodes_;
        return split_instances(d_, part);
    }

    double val_metric(const ModelParams& p, ExplainMethod m) const {
        if (metric_ == "correlation") {
            SanityOptions o;
            o.part = SplitPart::val;
            o.explainer = cfg_.explainer;
            return sanity_check(p, d_, m, cfg_.sweep_trials, master_.child(999), o).mean_spearman;
        }
        const auto v = precisions(p, m, val_nodes_);
        if (v.empty()) throw MetricError("validation split has no instances with ground truth");
        return summarize(v).mean;
    }

    CellResult run_cell(bool adv, PerturbLayer layer, ExplainMethod method) {
        CellResult c;
        c.id = cell_id(adv, layer, method);
        c.adversarial = adv;
        c.layer = layer;
        c.method = method;
        c.metric = metric_;
        note("cell " + c.id);
        try {
            double eps = 0.0;
            if (adv) {
                if (!base_val_acc_) throw std::runtime_error("baseline reference model failed to train");
                std::optional<std::size_t> best;
                std::optional<std::size_t> most_accurate;
                for (double e : cfg_.epsilons) {
                    SweepPoint sp;
                    sp.epsilon = e;
                    const auto& tm = model(true, layer, e, -1);
                    if (!tm.result) {
                        sp.error = tm.error;
                        c.sweep.push_back(sp);
                        continue;
                    }
                    sp.val_accuracy = tm.result->log.best_val_accuracy;
                    sp.val_metric = val_metric(tm.result->params, method);
                    sp.feasible = sp.val_accuracy >= *base_val_acc_ - cfg_.max_accuracy_drop - 1e-12;
                    c.sweep.push_back(sp);
                    const std::size_t i = c.sweep.size() - 1;
                    if (!most_accurate || sp.val_accuracy > c.sweep[*most_accurate].val_accuracy) most_accurate = i;
                    if (!sp.feasible) continue;
                    const bool better = !best || (metric_ == "correlation" ? sp.val_metric < c.sweep[*best].val_metric
                                                                          : sp.val_metric > c.sweep[*best].val_metric);
                    if (better) best = i;
                }
                if (!best && !most_accurate) throw std::runtime_error("every epsilon in the sweep failed to train");
                if (!best) {
                    best = most_accurate;
                    c.diagnostics = "no epsilon met the accuracy constraint; using the most accurate";
                }
                eps = c.sweep[*best].epsilon;
                c.chosen_epsilon = eps;
            }

            // Selection is final; the test split is touched from here on only.
            ++c.test_evaluations;
            const auto instances = graph_instances(SplitPart::test);
            if (instances.empty()) throw MetricError("test split has no instances to explain");
            std::vector<double> means, pearsons, accs;
            for (int r = 0; r < cfg_.train.replicate_count; ++r) {
                const auto& tm = model(adv, layer, eps, r);
                if (!tm.result) {
                    throw std::runtime_error("replicate " + std::to_string(r) + " failed: " + tm.error);
                }
                const auto& params = tm.result->params;
                ReplicateResult rr;
                rr.replicate = r;
                rr.val_accuracy = tm.result->log.best_val_accuracy;
                rr.test_accuracy = accuracy(params, d_, SplitPart::test);
                rr.model_fingerprint = hex64(params.fingerprint());
                const std::string model_id = c.id + "/r" + std::to_string(r);
                if (metric_ == "correlation") {
                    SanityOptions o;
                    o.explainer = cfg_.explainer;
                    o.instances = instances;
                    const auto s = sanity_check(params, d_, method, cfg_.trials,
                                                master_.child(1000 + static_cast<std::uint64_t>(r)), o);
                    for (const auto& x : s.samples) {
                        c.samples.push_back({model_id, x.trial, x.instance_id, "spearman", x.spearman});
                        c.samples.push_back({model_id, x.trial, x.instance_id, "pearson", x.pearson});
                    }
                    rr.metric_mean = s.mean_spearman;
                    rr.pearson_mean = s.mean_pearson;
                    rr.degenerate = s.degenerate_count;
                } else {
                    const auto p = precisions(params, method, instances);
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        c.samples.push_back({model_id, 0, instances[i].id(), "precision", p[i]});
                    }
                    rr.metric_mean = summarize(p).mean;
                }
                if (r == 0) render(c, params, instances);
                means.push_back(rr.metric_mean);
                pearsons.push_back(rr.pearson_mean);
                accs.push_back(rr.test_accuracy);
                c.replicates.push_back(rr);
                note("  replicate " + std::to_string(r) + " " + metric_ + " " + format_double(rr.metric_mean));
            }
            const auto s = summarize(means);
            c.mean = s.mean;
            c.stddev = s.stddev;
            c.pearson_mean = summarize(pearsons).mean;
            c.test_accuracy_mean = summarize(accs).mean;
        } catch (const std::exception& e) {
            c.failed = true;
            c.diagnostics = e.what();
            note("  cell " + c.id + " failed: " + e.what());
        }
        return c;
    }

    void render(CellResult& c, const ModelParams& p, const std::vector<InstanceRef>& instances) const {
        for (std::size_t i = 0; i < std::min(cfg_.dot_samples, instances.size()); ++i) {
            const auto& inst = instances[i];
            const auto& g = d_.graphs.at(inst.graph);
            const auto a = explain(c.method, p, g, {std::nullopt, inst.node}, cfg_.explainer);
            const std::string name = c.id + (inst.node ? "_node" : "_graph") + std::to_string(inst.id());
            c.renderings.emplace_back(name + ".dot", attribution_to_dot(a, g, name));
        }
    }

    const ExperimentConfig& cfg_;
    const Dataset& d_;
    Rng master_;
    ProgressFn progress_;
    Task task_;
    std::string metric_;
    std::optional<double> base_val_acc_;
    std::vector<InstanceRef> test_nodes_;
    std::vector<InstanceRef> val_nodes_;
    std::map<ModelKey, TrainedModel> cache_;
    mutable std::vector<std::vector<std::size_t>> lists_;
};

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Dataset& dataset, const ProgressFn& progress) {
    cfg.validate();
    dataset.validate();
    if (cfg.task && *cfg.task != dataset.task) {
        throw ConfigError("task is " + to_string(*cfg.task) + " but the dataset is " + to_string(dataset.task));
    }
    if (dataset.split.train.empty() || dataset.split.val.empty() || dataset.split.test.empty()) {
        throw ConfigError("the dataset needs non-empty train, validation and test splits");
    }
    return Runner(cfg, dataset, progress).run();
}

bool ExperimentReport::complete() const {
    return std::none_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.failed; });
}

namespace {

std::string opt_double(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

} // namespace

nlohmann::ordered_json ExperimentReport::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["status"] = complete() ? "complete" : "partial";
    j["config"] = advgnn::to_json(config);
    j["rng"] = std::string(Rng::algorithm());
    j["dataset"] = dataset_summary;
    auto cs = nlohmann::ordered_json::array();
    for (const auto& c : cells) {
        nlohmann::ordered_json o;
        o["id"] = c.id;
        o["adversarial_training"] = c.adversarial;
        o["perturbation_layer"] = c.adversarial ? to_string(c.layer) : "none";
        o["explanation_type"] = short_name(c.method);
        o["metric"] = c.metric;
        o["status"] = c.failed ? "failed" : "ok";
        if (!c.diagnostics.empty()) o["diagnostics"] = c.diagnostics;
        o["chosen_epsilon"] = c.chosen_epsilon ? nlohmann::ordered_json(*c.chosen_epsilon) : nlohmann::ordered_json();
        auto sw = nlohmann::ordered_json::array();
        for (const auto& s : c.sweep) {
            nlohmann::ordered_json p;
            p["epsilon"] = s.epsilon;
            p["val_accuracy"] = s.val_accuracy;
            p["val_metric"] = s.val_metric;
            p["feasible"] = s.feasible;
            if (!s.error.empty()) p["error"] = s.error;
            sw.push_back(p);
        }
        o["sweep"] = sw;
        o["mean"] = c.mean;
        o["stddev"] = c.stddev;
        if (c.metric == "correlation") o["pearson_mean"] = c.pearson_mean;
        o["test_accuracy_mean"] = c.test_accuracy_mean;
        o["test_evaluations"] = c.test_evaluations;
        auto reps = nlohmann::ordered_json::array();
        for (const auto& r : c.replicates) {
            nlohmann::ordered_json p;
            p["replicate"] = r.replicate;
            p["model_fingerprint"] = r.model_fingerprint;
            p["val_accuracy"] = r.val_accuracy;
            p["test_accuracy"] = r.test_accuracy;
            p["metric_mean"] = r.metric_mean;
            if (c.metric == "correlation") {
                p["pearson_mean"] = r.pearson_mean;
                p["degenerate"] = r.degenerate;
            }
            reps.push_back(p);
        }
        o["replicates"] = reps;
        cs.push_back(o);
    }
    j["cells"] = cs;
    auto cmp = nlohmann::ordered_json::array();
    for (const auto& c : comparisons) {
        nlohmann::ordered_json o;
        o["cell"] = c.cell;
        o["baseline"] = c.baseline;
        o["alternative"] = "cell mean < baseline mean (paired over replicates)";
        o["mean_difference"] = c.test.mean_difference;
        o["t"] = std::isfinite(c.test.t) ? nlohmann::ordered_json(c.test.t) : nlohmann::ordered_json(c.test.t < 0 ? "-inf" : "inf");
        o["df"] = c.test.df;
        o["p_value"] = c.test.p;
        cmp.push_back(o);
    }
    j["comparisons"] = cmp;
    if (random_precision_baseline) j["random_precision_baseline"] = *random_precision_baseline;
    if (random_precision_local_baseline) j["random_precision_local_baseline"] = *random_precision_local_baseline;
    return j;
}

std::string ExperimentReport::summary_csv() const {
    const std::string metric = cells.empty() ? "correlation" : cells.front().metric;
    std::ostringstream os;
    os << "adversarial_training,perturbation_layer,explanation_type,average_" << metric << ",std_" << metric;
    if (metric == "correlation") os << ",average_pearson";
    os << ",test_accuracy,chosen_epsilon,replicates,status\n";
    for (const auto& c : cells) {
        os << (c.adversarial ? "yes" : "no") << ',' << (c.adversarial ? to_string(c.layer) : "none") << ','
           << short_name(c.method) << ',';
        if (c.failed) {
            os << ",,";
            if (metric == "correlation") os << ',';
            os << ',' << opt_double(c.chosen_epsilon) << ',' << c.replicates.size() << ",failed\n";
            continue;
        }
        os << format_double(c.mean) << ',' << format_double(c.stddev);
        if (metric == "correlation") os << ',' << format_double(c.pearson_mean);
        os << ',' << format_double(c.test_accuracy_mean) << ',' << opt_double(c.chosen_epsilon) << ','
           << c.replicates.size() << ",ok\n";
    }
    return os.str();
}

std::string ExperimentReport::samples_csv() const {
    std::ostringstream os;
    os << "model_id,trial,instance_id,metric,value\n";
    for (const auto& c : cells)
        for (const auto& s : c.samples)
            os << s.model_id << ',' << s.trial << ',' << s.instance_id << ',' << s.metric << ','
               << format_double(s.value) << '\n';
    return os.str();
}

std::string ExperimentReport::replicates_csv() const {
    std::ostringstream os;
    os << "cell,replicate,val_accuracy,test_accuracy,metric_mean,pearson_mean,degenerate\n";
    for (const auto& c : cells)
        for (const auto& r : c.replicates)
            os << c.id << ',' << r.replicate << ',' << format_double(r.val_accuracy) << ','
               << format_double(r.test_accuracy) << ',' << format_double(r.metric_mean) << ','
               << format_double(r.pearson_mean) << ',' << r.degenerate << '\n';
    return os.str();
}

std::string ExperimentReport::sweep_csv() const {
    std::ostringstream os;
    os << "cell,epsilon,val_accuracy,val_metric,feasible,chosen\n";
    for (const auto& c : cells)
        for (const auto& s : c.sweep)
            os << c.id << ',' << format_double(s.epsilon) << ',' << format_double(s.val_accuracy) << ','
               << format_double(s.val_metric) << ',' << (s.feasible ? 1 : 0) << ','
               << (c.chosen_epsilon && *c.chosen_epsilon == s.epsilon ? 1 : 0) << '\n';
    return os.str();
}

void write_report(const ExperimentReport& report, const ProgressFn& progress) {
    const auto& out = report.config.out;
    write_text_atomic(out / "summary.csv", report.summary_csv());
    write_text_atomic(out / "samples.csv", report.samples_csv());
    write_text_atomic(out / "replicates.csv", report.replicates_csv());
    write_text_atomic(out / "sweep.csv", report.sweep_csv());
    write_text_atomic(out / "report.json", report.to_json().dump(2) + "\n");
    for (const auto& c : report.cells)
        for (const auto& [name, text] : c.renderings) write_text_atomic(out / "dot" / name, text);
    if (progress) progress("wrote results to " + out.string());
}

} // namespace advgnn
