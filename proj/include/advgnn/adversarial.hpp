#ifndef ADVGNN_ADVERSARIAL_HPP
#define ADVGNN_ADVERSARIAL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgnn/gcn.hpp"
#include "advgnn/graph.hpp"
#include "advgnn/optim.hpp"
#include "advgnn/rng.hpp"

namespace advgnn {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

/// Where the latent perturbation enters: the input features or the
/// penultimate node embedding X1.
enum class PerturbLayer { x0, penultimate };

std::string to_string(PerturbLayer layer);
PerturbLayer perturb_layer_from_string(const std::string& name);
inline int injection_index(PerturbLayer layer) { return layer == PerturbLayer::x0 ? 0 : 1; }

/// Adversarial term of the objective. The perturbation norm is always l-inf.
struct AdvConfig {
    bool enabled = false;
    double epsilon = 0.0;
    double lambda = 1.0;
    int pgd_steps = 1;
    /// Step size for PGD; 0 means "use epsilon".
    double pgd_step_size = 0.0;
    PerturbLayer layer = PerturbLayer::x0;
    /// Fraction of training instances perturbed per step.
    double sample_fraction = 1.0;

    void validate() const;
    double step_size() const noexcept { return pgd_step_size > 0.0 ? pgd_step_size : epsilon; }
};

struct TrainConfig {
    int epochs = 200;
    std::size_t hidden = 64;
    OptimizerConfig optimizer{};
    std::uint64_t master_seed = 0;
    int replicate_count = 10;

    void validate() const;
};

nlohmann::ordered_json to_json(const AdvConfig& cfg);
nlohmann::ordered_json to_json(const TrainConfig& cfg);
AdvConfig adv_config_from_json(const nlohmann::json& j, AdvConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
/// Short hash of both configs, stored alongside trained models.
std::string config_fingerprint(const TrainConfig& tcfg, const AdvConfig& acfg);

/// phi = epsilon * sign(grad of loss w.r.t. X_layer), with sign(0) = 0.
Matrix fgsm_attack(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                   const LossTarget& target, const AdvConfig& cfg);
Matrix fgsm_attack(const ModelParams& params, const Graph& g, const LossTarget& target, const AdvConfig& cfg);

/// pgd_steps iterations of phi <- clamp(phi + step * sign(grad at X_layer + phi), -eps, eps)
/// starting from phi = 0.
Matrix pgd_attack(const ModelParams& params, const Matrix& adjacency, const Matrix& features,
                  const LossTarget& target, const AdvConfig& cfg);
Matrix pgd_attack(const ModelParams& params, const Graph& g, const LossTarget& target, const AdvConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double clean_loss = 0.0;
    double adv_loss = 0.0;
    double total_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_accuracy = -1.0;

    /// Columns: epoch, clean_loss, adv_loss, val_accuracy.
    std::string to_csv() const;
};

struct TrainResult {
    ModelParams params;
    TrainLog log;
};

/// Full-batch minimization of clean loss + lambda * adversarial loss, with
/// the perturbation recomputed against the current weights at every step.
/// Returns the weights from the epoch with the best validation accuracy.
/// rng.child(0) draws the initial weights; rng.child(1) drives subsampling.
TrainResult train(const Dataset& dataset, const TrainConfig& tcfg, const AdvConfig& acfg, const Rng& rng);

} // namespace advgnn

#endif // ADVGNN_ADVERSARIAL_HPP
