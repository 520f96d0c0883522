#ifndef ADVGNN_OPTIM_HPP
#define ADVGNN_OPTIM_HPP

#include <span>
#include <string>
#include <vector>

namespace advgnn {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

/// First-order optimizer over a fixed list of parameter blocks. Moment
/// buffers are allocated on the first step and keyed by block position.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

    void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

    const OptimizerConfig& config() const noexcept { return cfg_; }
    long steps_taken() const noexcept { return t_; }

private:
    OptimizerConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace advgnn

#endif // ADVGNN_OPTIM_HPP
