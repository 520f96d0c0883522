// Command-line front end: generate, train, explain, sanity-check, evaluate, experiment.
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advgnn/adversarial.hpp"
#include "advgnn/experiment.hpp"
#include "advgnn/explainers.hpp"
#include "advgnn/io.hpp"
#include "advgnn/metrics.hpp"

using namespace advgnn;
namespace fs = std::filesystem;

namespace {

constexpr int exit_validation = 1;
constexpr int exit_runtime = 2;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
    auto* opt = cmd->add_option("--config", c.config, "JSON config file");
    if (needs_config) opt->required();
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

ExperimentConfig load_config(const Common& c) {
    ExperimentConfig cfg;
    if (!c.config.empty()) cfg = experiment_config_from_json(read_json(c.config));
    if (c.seed) {
        cfg.master_seed = *c.seed;
        cfg.train.master_seed = *c.seed;
    }
    if (!c.out.empty()) cfg.out = c.out;
    return cfg;
}

ProgressFn progress(const Common& c) {
    if (c.quiet) return {};
    return [](const std::string& s) { std::cerr << s << '\n'; };
}

std::vector<std::size_t> parse_ids(const std::string& text) {
    std::vector<std::size_t> ids;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size()) throw std::invalid_argument("bad instance id '" + tok + "'");
        ids.push_back(static_cast<std::size_t>(v));
    }
    return ids;
}

ExplainTarget target_for(const Dataset& d, std::size_t id, std::size_t& graph) {
    if (d.task == Task::graph_classification) {
        if (id >= d.graphs.size()) throw std::invalid_argument("graph id " + std::to_string(id) + " out of range");
        graph = id;
        return {};
    }
    graph = 0;
    if (id >= d.graphs.front().num_nodes) throw std::invalid_argument("node id " + std::to_string(id) + " out of range");
    return {std::nullopt, id};
}

std::vector<std::size_t> default_ids(const Dataset& d) {
    std::vector<std::size_t> ids;
    for (auto i : d.split.test) ids.push_back(i);
    return ids;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adversarially trained GCNs and explanation reliability checks"};
    app.require_subcommand(1);

    Common gen_c, train_c, explain_c, sanity_c, eval_c, exp_c;

    auto* gen = app.add_subcommand("generate", "generate and split a synthetic dataset");
    add_common(gen, gen_c, false);

    auto* trn = app.add_subcommand("train", "train one model");
    add_common(trn, train_c, false);
    std::string train_dataset;
    bool train_adv = false;
    double train_eps = 0.0;
    std::string train_layer = "X0";
    int train_replicate = 0;
    trn->add_option("--dataset", train_dataset, "dataset file")->required();
    trn->add_flag("--adversarial", train_adv, "enable adversarial training");
    trn->add_option("--epsilon", train_eps, "perturbation radius");
    trn->add_option("--layer", train_layer, "perturbation layer: X0 or penultimate");
    trn->add_option("--replicate", train_replicate, "replicate index (selects the seed stream)");

    auto* exp_cmd = app.add_subcommand("explain", "explain instances with a trained model");
    add_common(exp_cmd, explain_c, false);
    std::string ex_model, ex_dataset, ex_method, ex_ids;
    exp_cmd->add_option("--model", ex_model, "model file")->required();
    exp_cmd->add_option("--dataset", ex_dataset, "dataset file")->required();
    exp_cmd->add_option("--method", ex_method, "VG, GC or GNNX")->required();
    exp_cmd->add_option("--instances", ex_ids, "comma-separated graph or node ids (default: test split)");

    auto* san = app.add_subcommand("sanity-check", "model-randomization check of an explainer");
    add_common(san, sanity_c, false);
    std::string san_model, san_dataset, san_method;
    int san_trials = 50;
    san->add_option("--model", san_model, "model file")->required();
    san->add_option("--dataset", san_dataset, "dataset file")->required();
    san->add_option("--method", san_method, "VG, GC or GNNX")->required();
    san->add_option("--trials", san_trials, "randomized models");

    auto* ev = app.add_subcommand("evaluate", "accuracy and ground-truth precision");
    add_common(ev, eval_c, false);
    std::string ev_model, ev_dataset, ev_method, ev_split = "test";
    ev->add_option("--model", ev_model, "model file")->required();
    ev->add_option("--dataset", ev_dataset, "dataset file")->required();
    ev->add_option("--method", ev_method, "also report precision of this explainer");
    ev->add_option("--split", ev_split, "train, val or test");

    auto* expt = app.add_subcommand("experiment", "full protocol: sweep, replicates, reports");
    add_common(expt, exp_c, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_validation;
    }

    try {
        if (*gen) {
            auto cfg = load_config(gen_c);
            const auto d = prepare_dataset(cfg);
            const auto path = cfg.out / "dataset.json";
            save_dataset(d, path);
            for (const auto& w : d.split.warnings) std::cerr << "warning: " << w << '\n';
            if (!gen_c.quiet) std::cerr << "wrote " << path.string() << '\n';
        } else if (*trn) {
            auto cfg = load_config(train_c);
            const auto d = load_dataset(train_dataset);
            AdvConfig a = cfg.adversarial;
            a.enabled = train_adv;
            a.epsilon = train_eps;
            a.layer = perturb_layer_from_string(train_layer);
            a.validate();
            if (train_replicate < 0) throw std::invalid_argument("--replicate must be >= 0");
            const Rng master(cfg.master_seed);
            const auto res = train(d, cfg.train, a, master.child(100 + static_cast<std::uint64_t>(train_replicate)));
            save_model(res.params, cfg.out / "model.json", config_fingerprint(cfg.train, a));
            write_text_atomic(cfg.out / "train_log.csv", res.log.to_csv());
            if (!train_c.quiet) {
                std::cerr << "best validation accuracy " << format_double(res.log.best_val_accuracy) << " at epoch "
                          << res.log.best_epoch << "; wrote " << (cfg.out / "model.json").string() << '\n';
            }
        } else if (*exp_cmd) {
            auto cfg = load_config(explain_c);
            const auto method = explain_method_from_string(ex_method);
            const auto params = load_model(ex_model);
            const auto d = load_dataset(ex_dataset);
            check_compatible(params, d);
            const auto ids = ex_ids.empty() ? default_ids(d) : parse_ids(ex_ids);
            auto records = nlohmann::ordered_json::array();
            for (auto id : ids) {
                std::size_t gi = 0;
                const auto target = target_for(d, id, gi);
                const auto a = explain(method, params, d.graphs[gi], target, cfg.explainer);
                const std::string name = short_name(method) + (target.node ? "_node" : "_graph") + std::to_string(id);
                records.push_back(attribution_to_json(a, d.graphs[gi], name));
                write_text_atomic(cfg.out / (name + ".dot"), attribution_to_dot(a, d.graphs[gi], name));
            }
            write_text_atomic(cfg.out / ("attributions_" + short_name(method) + ".json"), records.dump(1) + "\n");
            if (!explain_c.quiet) std::cerr << "explained " << ids.size() << " instance(s)\n";
        } else if (*san) {
            auto cfg = load_config(sanity_c);
            const auto method = explain_method_from_string(san_method);
            const auto params = load_model(san_model);
            const auto d = load_dataset(san_dataset);
            check_compatible(params, d);
            SanityOptions o;
            o.explainer = cfg.explainer;
            const auto res = sanity_check(params, d, method, san_trials, Rng(cfg.master_seed).child(1000), o);
            std::ostringstream csv;
            csv << "model_id,trial,instance_id,metric,value\n";
            const std::string id = hex64(params.fingerprint());
            for (const auto& s : res.samples) {
                csv << id << ',' << s.trial << ',' << s.instance_id << ",spearman," << format_double(s.spearman) << '\n';
                csv << id << ',' << s.trial << ',' << s.instance_id << ",pearson," << format_double(s.pearson) << '\n';
            }
            write_text_atomic(cfg.out / "sanity_samples.csv", csv.str());
            nlohmann::ordered_json j;
            j["method"] = short_name(method);
            j["trials"] = san_trials;
            j["samples"] = res.samples.size();
            j["mean_spearman"] = res.mean_spearman;
            j["std_spearman"] = res.std_spearman;
            j["mean_pearson"] = res.mean_pearson;
            j["degenerate"] = res.degenerate_count;
            write_text_atomic(cfg.out / "sanity_summary.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << '\n';
        } else if (*ev) {
            auto cfg = load_config(eval_c);
            const auto part = split_part_from_string(ev_split);
            const auto params = load_model(ev_model);
            const auto d = load_dataset(ev_dataset);
            check_compatible(params, d);
            nlohmann::ordered_json j;
            j["split"] = to_string(part);
            j["accuracy"] = accuracy(params, d, part);
            if (!ev_method.empty()) {
                const auto method = explain_method_from_string(ev_method);
                std::vector<double> p;
                for (const auto& inst : split_instances(d, part)) {
                    const auto& g = d.graphs[inst.graph];
                    const bool has_gt = inst.node ? (*inst.node < g.node_ground_truth.size() &&
                                                     !g.node_ground_truth[*inst.node].empty())
                                                  : !g.ground_truth.empty();
                    if (!has_gt) continue;
                    const auto a = explain(method, params, g, {std::nullopt, inst.node}, cfg.explainer);
                    p.push_back(precision_at_gt(a, g).precision);
                }
                if (p.empty()) {
                    throw MetricError("no instance in the split has ground truth; use a dataset with planted motifs");
                }
                j["method"] = short_name(method);
                j["precision_instances"] = p.size();
                j["mean_precision"] = summarize(p).mean;
            }
            if (!eval_c.out.empty()) write_text_atomic(cfg.out / "evaluation.json", j.dump(2) + "\n");
            std::cout << j.dump(2) << '\n';
        } else if (*expt) {
            auto cfg = load_config(exp_c);
            const auto d = prepare_dataset(cfg);
            for (const auto& w : d.split.warnings) std::cerr << "warning: " << w << '\n';
            const auto report = run_experiment(cfg, d, progress(exp_c));
            write_report(report, progress(exp_c));
            if (!exp_c.quiet) std::cout << report.summary_csv();
            if (!report.complete()) {
                std::cerr << "some cells failed; see report.json\n";
                return exit_runtime;
            }
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << '\n';
        return exit_runtime;
    }
    return 0;
}
