#include "advgnn/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "advgnn/io.hpp"

namespace advgnn {

std::string to_string(PerturbLayer layer) { return layer == PerturbLayer::x0 ? "X0" : "penultimate"; }

PerturbLayer perturb_layer_from_string(const std::string& name) {
    if (name == "X0" || name == "x0" || name == "input") return PerturbLayer::x0;
    if (name == "penultimate" || name == "X1" || name == "x1" || name == "X_penultimate") return PerturbLayer::penultimate;
    throw ConfigError("unknown perturbation layer '" + name + "'; expected X0 or penultimate");
}

void AdvConfig::validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ConfigError("adversarial.epsilon must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("adversarial.lambda must be >= 0");
    if (pgd_steps < 1) throw ConfigError("adversarial.pgd_steps must be >= 1");
    if (!(pgd_step_size >= 0.0) || !std::isfinite(pgd_step_size)) {
        throw ConfigError("adversarial.pgd_step_size must be >= 0");
    }
    if (pgd_steps > 1 && !(step_size() > 0.0) && epsilon > 0.0) {
        throw ConfigError("adversarial.pgd_step_size must be > 0 when pgd_steps > 1");
    }
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
        throw ConfigError("adversarial.sample_fraction must lie in (0, 1]");
    }
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be positive");
    if (hidden < 1) throw ConfigError("train.hidden must be positive");
    if (!(optimizer.learning_rate > 0.0) || !std::isfinite(optimizer.learning_rate)) {
        throw ConfigError("train.learning_rate must be positive");
    }
    if (optimizer.kind == OptimizerKind::adam) {
        if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw ConfigError("train.optimizer.beta1 must lie in [0, 1)");
        if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw ConfigError("train.optimizer.beta2 must lie in [0, 1)");
        if (!(optimizer.eps > 0.0)) throw ConfigError("train.optimizer.eps must be positive");
    }
    if (replicate_count < 1) throw ConfigError("train.replicate_count must be >= 1");
}

nlohmann::ordered_json to_json(const AdvConfig& cfg) {
    nlohmann::ordered_json j;
    j["enabled"] = cfg.enabled;
    j["epsilon"] = cfg.epsilon;
    j["lambda"] = cfg.lambda;
    j["norm"] = "linf";
    j["pgd_steps"] = cfg.pgd_steps;
    j["pgd_step_size"] = cfg.pgd_step_size;
    j["layer"] = to_string(cfg.layer);
    j["sample_fraction"] = cfg.sample_fraction;
    return j;
}

nlohmann::ordered_json to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["epochs"] = cfg.epochs;
    j["hidden"] = cfg.hidden;
    j["learning_rate"] = cfg.optimizer.learning_rate;
    nlohmann::ordered_json o;
    o["kind"] = to_string(cfg.optimizer.kind);
    o["beta1"] = cfg.optimizer.beta1;
    o["beta2"] = cfg.optimizer.beta2;
    o["eps"] = cfg.optimizer.eps;
    j["optimizer"] = o;
    j["master_seed"] = cfg.master_seed;
    j["replicate_count"] = cfg.replicate_count;
    return j;
}

namespace {

template <class T>
T field(const nlohmann::json& v, const std::string& name) {
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(name + " has the wrong type");
    }
}

} // namespace

AdvConfig adv_config_from_json(const nlohmann::json& j, AdvConfig base) {
    if (!j.is_object()) throw ConfigError("adversarial config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto name = "adversarial." + k;
        const auto& v = it.value();
        if (k == "enabled") base.enabled = field<bool>(v, name);
        else if (k == "epsilon") base.epsilon = field<double>(v, name);
        else if (k == "lambda") base.lambda = field<double>(v, name);
        else if (k == "norm") {
            if (field<std::string>(v, name) != "linf") throw ConfigError("adversarial.norm must be linf");
        } else if (k == "pgd_steps") base.pgd_steps = field<int>(v, name);
        else if (k == "pgd_step_size") base.pgd_step_size = field<double>(v, name);
        else if (k == "layer") base.layer = perturb_layer_from_string(field<std::string>(v, name));
        else if (k == "sample_fraction") base.sample_fraction = field<double>(v, name);
        else throw ConfigError("unknown key " + name);
    }
    base.validate();
    return base;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base) {
    if (!j.is_object()) throw ConfigError("train config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto name = "train." + k;
        const auto& v = it.value();
        if (k == "epochs") base.epochs = field<int>(v, name);
        else if (k == "hidden") base.hidden = field<std::size_t>(v, name);
        else if (k == "learning_rate") base.optimizer.learning_rate = field<double>(v, name);
        else if (k == "master_seed") base.master_seed = field<std::uint64_t>(v, name);
        else if (k == "replicate_count") base.replicate_count = field<int>(v, name);
        else if (k == "optimizer") {
            if (v.is_string()) {
                base.optimizer.kind = optimizer_kind_from_string(v.get<std::string>());
                continue;
            }
            if (!v.is_object()) throw ConfigError("train.optimizer must be a name or an object");
            for (auto o = v.begin(); o != v.end(); ++o) {
                const auto oname = name + "." + o.key();
                if (o.key() == "kind") {
                    try {
                        base.optimizer.kind = optimizer_kind_from_string(field<std::string>(o.value(), oname));
                    } catch (const std::invalid_argument& e) {
                        throw ConfigError(oname + ": " + e.what());
                    }
                } else if (o.key() == "learning_rate") base.optimizer.learning_rate = field<double>(o.value(), oname);
                else if (o.key() == "beta1") base.optimizer.beta1 = field<double>(o.value(), oname);
                else if (o.key() == "beta2") base.optimizer.beta2 = field<double>(o.value(), oname);
                else if (o.key() == "eps") base.optimizer.eps = field<double>(o.value(), oname);
                else throw ConfigError("unknown key " + oname);
            }
        } else {
            throw ConfigError("unknown key " + name);
        }
    }
    base.validate();
    return base;
}

std::string config_fingerprint(const TrainConfig& tcfg, const AdvConfig& acfg) {
    nlohmann::ordered_json j;
    j["train"] = to_json(tcfg);
    j["adversarial"] = to_json(acfg);
    const auto s = j.dump();
    return hex64(fnv1a(s.data(), s.size()));
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Matrix layer_gradient(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                      const LossTarget& target, PerturbLayer layer, const Matrix& phi) {
    const Injection inj{injection_index(layer), phi};
    const auto cache = forward(params, adjacency, features, {nullptr, &inj});
    GradientRequest wants;
    wants.params = false;
    wants.hidden_layer = injection_index(layer);
    return *backward(params, cache, target, wants).hidden;
}

Matrix zero_perturbation(const ModelParams& params, const Matrix& features, PerturbLayer layer) {
    return layer == PerturbLayer::x0 ? Matrix(features.rows(), features.cols()) : Matrix(features.rows(), params.hidden);
}

} // namespace

Matrix fgsm_attack(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                   const LossTarget& target, const AdvConfig& cfg) {
    cfg.validate();
    if (cfg.pgd_steps != 1) throw ConfigError("fgsm_attack requires pgd_steps = 1");
    Matrix phi = zero_perturbation(params, features, cfg.layer);
    const Matrix g = layer_gradient(params, adjacency, features, target, cfg.layer, phi);
    for (std::size_t i = 0; i < phi.size(); ++i) phi.values()[i] = cfg.epsilon * sign(g.values()[i]);
    return phi;
}

Matrix fgsm_attack(const ModelParams& params, const Graph& g, const LossTarget& target, const AdvConfig& cfg) {
    return fgsm_attack(params, normalize_adjacency(g), g.features, target, cfg);
}

Matrix pgd_attack(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                  const LossTarget& target, const AdvConfig& cfg) {
    cfg.validate();
    Matrix phi = zero_perturbation(params, features, cfg.layer);
    const double eps = cfg.epsilon;
    const double step = cfg.step_size();
    for (int k = 0; k < cfg.pgd_steps; ++k) {
        const Matrix g = layer_gradient(params, adjacency, features, target, cfg.layer, phi);
        for (std::size_t i = 0; i < phi.size(); ++i) {
            double& p = phi.values()[i];
            p = std::clamp(p + step * sign(g.values()[i]), -eps, eps);
        }
    }
    return phi;
}

Matrix pgd_attack(const ModelParams& params, const Graph& g, const LossTarget& target, const AdvConfig& cfg) {
    return pgd_attack(params, normalize_adjacency(g), g.features, target, cfg);
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,clean_loss,adv_loss,val_accuracy\n";
    for (const auto& e : epochs) {
        os << e.epoch << ',' << format_double(e.clean_loss) << ',' << format_double(e.adv_loss) << ','
           << format_double(e.val_accuracy) << '\n';
    }
    return os.str();
}

namespace {

struct Instance {
    const Matrix* adjacency;
    const Matrix* features;
    LossTarget target;
};

void accumulate(std::vector<Matrix*>& acc, const GradientBundle& g, double w, bool graph_task) {
    axpy(*acc[0], w, g.w1);
    axpy(*acc[1], w, g.w2);
    if (graph_task) {
        axpy(*acc[2], w, g.head_w);
        axpy(*acc[3], w, g.head_b);
    }
}

} // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& tcfg, const AdvConfig& acfg, const Rng& rng) {
    tcfg.validate();
    acfg.validate();
    dataset.validate();
    if (dataset.split.train.empty() || dataset.split.val.empty()) {
        throw ConfigError("training needs non-empty train and validation splits");
    }
    const bool graph_task = dataset.task == Task::graph_classification;
    Rng init_rng = rng.child(0);
    Rng sample_rng = rng.child(1);

    ModelParams params = ModelParams::init(dataset.task, dataset.graphs.front().feature_dim(), tcfg.hidden,
                                           dataset.num_classes, init_rng);

    std::vector<Matrix> adjacency;
    adjacency.reserve(dataset.graphs.size());
    for (const auto& g : dataset.graphs) adjacency.push_back(normalize_adjacency(g));

    std::vector<Instance> train_set;
    std::vector<Instance> val_set;
    if (graph_task) {
        for (auto i : dataset.split.train) {
            train_set.push_back({&adjacency[i], &dataset.graphs[i].features, LossTarget::graph(dataset.graphs[i].labels[0])});
        }
        for (auto i : dataset.split.val) {
            val_set.push_back({&adjacency[i], &dataset.graphs[i].features, LossTarget::graph(dataset.graphs[i].labels[0])});
        }
    } else {
        const auto& g = dataset.graphs.front();
        train_set.push_back({&adjacency[0], &g.features, LossTarget::node_set(g.labels, dataset.split.train)});
        val_set.push_back({&adjacency[0], &g.features, LossTarget::node_set(g.labels, dataset.split.val)});
    }

    Optimizer opt(tcfg.optimizer);
    TrainResult result;
    result.params = params;
    const double inv_train = 1.0 / static_cast<double>(train_set.size());

    auto diverged = [&](int epoch, const std::string& what) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << " (learning rate " << format_double(tcfg.optimizer.learning_rate)
           << "): " << what;
        return DivergenceError(os.str(), epoch);
    };

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        Matrix gw1(params.w1.rows(), params.w1.cols());
        Matrix gw2(params.w2.rows(), params.w2.cols());
        Matrix ghw(params.head_w.rows(), params.head_w.cols());
        Matrix ghb(params.head_b.rows(), params.head_b.cols());
        std::vector<Matrix*> acc{&gw1, &gw2, &ghw, &ghb};
        EpochRecord rec;
        rec.epoch = epoch;
        try {
            double clean = 0.0;
            for (const auto& inst : train_set) {
                const auto cache = forward(params, *inst.adjacency, *inst.features);
                clean += loss(cache, inst.target);
                accumulate(acc, backward(params, cache, inst.target, {}), inv_train, graph_task);
            }
            rec.clean_loss = clean * inv_train;

            if (acfg.enabled) {
                std::vector<const Instance*> chosen;
                if (acfg.sample_fraction >= 1.0) {
                    for (const auto& inst : train_set) chosen.push_back(&inst);
                } else {
                    for (const auto& inst : train_set)
                        if (sample_rng.bernoulli(acfg.sample_fraction)) chosen.push_back(&inst);
                    if (chosen.empty()) chosen.push_back(&train_set[sample_rng.below(train_set.size())]);
                }
                const double inv_adv = 1.0 / static_cast<double>(chosen.size());
                double adv = 0.0;
                for (const auto* inst : chosen) {
                    const Matrix phi = pgd_attack(params, *inst->adjacency, *inst->features, inst->target, acfg);
                    const Injection inj{injection_index(acfg.layer), phi};
                    const auto cache = forward(params, *inst->adjacency, *inst->features, {nullptr, &inj});
                    adv += loss(cache, inst->target);
                    accumulate(acc, backward(params, cache, inst->target, {}), acfg.lambda * inv_adv, graph_task);
                }
                rec.adv_loss = adv * inv_adv;
                rec.total_loss = rec.clean_loss + acfg.lambda * rec.adv_loss;
            } else {
                rec.total_loss = rec.clean_loss;
            }
        } catch (const NumericError& e) {
            throw diverged(epoch, e.what());
        }
        if (!std::isfinite(rec.total_loss)) throw diverged(epoch, "non-finite loss");
        for (const Matrix* m : acc) {
            if (!all_finite(*m)) throw diverged(epoch, "non-finite gradient");
        }

        std::vector<std::span<const double>> grads{gw1.values(), gw2.values()};
        if (graph_task) {
            grads.push_back(ghw.values());
            grads.push_back(ghb.values());
        }
        opt.step(params.blocks(), grads);
        for (auto b : params.blocks())
            for (double v : b)
                if (!std::isfinite(v)) throw diverged(epoch, "non-finite parameters");

        double vloss = 0.0;
        std::size_t correct = 0, total = 0;
        for (const auto& inst : val_set) {
            ForwardCache cache;
            try {
                cache = forward(params, *inst.adjacency, *inst.features);
            } catch (const NumericError& e) {
                throw diverged(epoch, e.what());
            }
            vloss += loss(cache, inst.target);
            if (graph_task) {
                correct += predicted_class(cache) == inst.target.classes[0];
                ++total;
            } else {
                for (auto v : inst.target.nodes) {
                    correct += predicted_class(cache, v) == inst.target.classes[v];
                    ++total;
                }
            }
        }
        rec.val_loss = vloss / static_cast<double>(val_set.size());
        rec.val_accuracy = static_cast<double>(correct) / static_cast<double>(total);
        if (!std::isfinite(rec.val_loss)) throw diverged(epoch, "non-finite validation loss");
        if (rec.val_accuracy > result.log.best_val_accuracy) {
            result.log.best_val_accuracy = rec.val_accuracy;
            result.log.best_epoch = epoch;
            result.params = params;
        }
        result.log.epochs.push_back(rec);
    }
    return result;
}

} // namespace advgnn
