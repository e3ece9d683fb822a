#pragma once

#include <string>
#include <utility>
#include <vector>

#include "convmg/gradient.hpp"

namespace convmg {

struct TrainConfig {
    int steps = 1000;
    double learning_rate = 1e-3;
    enum class Optimizer { Adam, Sgd } optimizer = Optimizer::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double sgd_momentum = 0.9;
    int train_J = 5;  // the paper trains on J <= 5
    bool resample_each_step = true;
    std::uint64_t seed = 1;
    int power_k = 10;
    int n_batch = 10;
};

/// Serialized training result: the trained kernels plus enough metadata to
/// rebuild and evaluate the network at any depth.
struct Checkpoint {
    int version = 1;
    ModelKind kind = ModelKind::S1MG_S;
    std::string problem;
    int train_J = 5;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, Kernel>> kernels;  // trainable, in store order
    std::vector<double> loss_history;                     // one estimate per step
    double final_loss = 0.0;                              // fresh-seed estimate after training
    bool diverged = false;
    TrainConfig config;
};

/// Named gradients of the loss for every trainable kernel; errors when the
/// network has nothing to train.
std::vector<std::pair<std::string, Kernel>> gradient(const MgNetwork& net, const LossConfig& cfg);

/// Unsupervised training on the train_J grid: stochastic gradient descent on
/// the rho1 loss. Ten consecutive divergent steps abort with a partial
/// checkpoint (diverged = true). Deterministic given the config.
Checkpoint train(ModelKind kind, const ProblemSpec& problem, const TrainConfig& cfg);

/// Rebuilds the trained network from a checkpoint (at its train_J depth).
MgNetwork restore_network(const Checkpoint& ck);

/// Checkpoint extracted from a live network (e.g. at initialization).
Checkpoint checkpoint_from(const MgNetwork& net, const TrainConfig& cfg);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Seed used for post-training evaluations; differs from every training
/// step seed so the estimator is not scored on its own batch.
std::uint64_t eval_seed_for(std::uint64_t train_seed);

}  // namespace convmg
