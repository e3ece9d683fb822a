#include "convmg/train.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace convmg {

using ordered_json = nlohmann::ordered_json;

std::vector<std::pair<std::string, Kernel>> gradient(const MgNetwork& net, const LossConfig& cfg) {
    LossAndGrad lg = loss_and_gradient(net, cfg);
    std::vector<std::pair<std::string, Kernel>> named;
    for (int idx : net.params.trainable_indices())
        named.emplace_back(net.params.names[idx], lg.grads[idx]);
    return named;
}

std::uint64_t eval_seed_for(std::uint64_t train_seed) {
    return derive_seed(train_seed, 0xE7A1u);
}

namespace {

struct AdamState {
    std::vector<Kernel> m, v;
    long t = 0;
};

std::uint64_t step_seed(const TrainConfig& cfg, int step) {
    return cfg.resample_each_step ? derive_seed(cfg.seed, static_cast<std::uint64_t>(step))
                                  : derive_seed(cfg.seed, 0);
}

}  // namespace

Checkpoint train(ModelKind kind, const ProblemSpec& problem, const TrainConfig& cfg) {
    if (!model_trainable(kind))
        throw std::invalid_argument("train: " + model_name(kind) + " has no trainable kernels");
    if (cfg.train_J < 2 || cfg.train_J > 5)
        throw std::invalid_argument("train: train_J must lie in [2, 5]");
    if (cfg.steps < 0 || cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train: bad steps or learning rate");

    MgNetwork net = build_model(kind, cfg.train_J, problem);
    const std::vector<int> tidx = net.params.trainable_indices();

    AdamState adam;
    std::vector<Kernel> momentum;
    for (int idx : tidx) {
        adam.m.emplace_back(net.params.kernels[idx].size());
        adam.v.emplace_back(net.params.kernels[idx].size());
        momentum.emplace_back(net.params.kernels[idx].size());
    }

    Checkpoint ck;
    ck.kind = kind;
    ck.problem = problem.name;
    ck.train_J = cfg.train_J;
    ck.seed = cfg.seed;
    ck.config = cfg;

    int consecutive_bad = 0;
    for (int step = 0; step < cfg.steps; ++step) {
        LossConfig lc{cfg.power_k, cfg.n_batch, step_seed(cfg, step)};
        LossAndGrad lg = loss_and_gradient(net, lc);
        ck.loss_history.push_back(lg.value);
        if (!lg.finite) {
            if (++consecutive_bad >= 10) {
                ck.diverged = true;
                break;
            }
            continue;  // abort this step, keep parameters
        }
        consecutive_bad = 0;
        if (cfg.optimizer == TrainConfig::Optimizer::Adam) {
            adam.t += 1;
            const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(adam.t));
            const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(adam.t));
            for (std::size_t i = 0; i < tidx.size(); ++i) {
                Kernel& theta = net.params.kernels[tidx[i]];
                const Kernel& g = lg.grads[tidx[i]];
                for (int p = 0; p < theta.size(); ++p)
                    for (int q = 0; q < theta.size(); ++q) {
                        double& m = adam.m[i](p, q);
                        double& v = adam.v[i](p, q);
                        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g(p, q);
                        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g(p, q) * g(p, q);
                        theta(p, q) -=
                            cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
                    }
            }
        } else {
            for (std::size_t i = 0; i < tidx.size(); ++i) {
                Kernel& theta = net.params.kernels[tidx[i]];
                const Kernel& g = lg.grads[tidx[i]];
                for (int p = 0; p < theta.size(); ++p)
                    for (int q = 0; q < theta.size(); ++q) {
                        double& mom = momentum[i](p, q);
                        mom = cfg.sgd_momentum * mom + g(p, q);
                        theta(p, q) -= cfg.learning_rate * mom;
                    }
            }
        }
        net.prepare();
    }

    LossConfig eval{cfg.power_k, cfg.n_batch, eval_seed_for(cfg.seed)};
    ck.final_loss = loss(net, eval);
    for (int idx : tidx) ck.kernels.emplace_back(net.params.names[idx], net.params.kernels[idx]);
    return ck;
}

Checkpoint checkpoint_from(const MgNetwork& net, const TrainConfig& cfg) {
    Checkpoint ck;
    ck.kind = net.kind;
    ck.problem = net.problem.name;
    ck.train_J = net.J;
    ck.seed = cfg.seed;
    ck.config = cfg;
    for (int idx : net.params.trainable_indices())
        ck.kernels.emplace_back(net.params.names[idx], net.params.kernels[idx]);
    return ck;
}

MgNetwork restore_network(const Checkpoint& ck) {
    MgNetwork net = build_model(ck.kind, ck.train_J, problem_by_name(ck.problem));
    const std::vector<int> tidx = net.params.trainable_indices();
    if (tidx.size() != ck.kernels.size())
        throw std::invalid_argument("restore_network: kernel count does not match the model kind");
    for (const auto& [name, kernel] : ck.kernels) {
        const int idx = net.params.index_of(name);
        if (idx < 0 || !net.params.trainable[idx])
            throw std::invalid_argument("restore_network: unexpected kernel '" + name + "'");
        if (kernel.size() != net.params.kernels[idx].size())
            throw std::invalid_argument("restore_network: kernel size mismatch for '" + name + "'");
        net.params.kernels[idx] = kernel;
    }
    net.prepare();
    net.validate();
    return net;
}

namespace {

ordered_json config_json(const TrainConfig& cfg) {
    ordered_json j;
    j["steps"] = cfg.steps;
    j["learning_rate"] = cfg.learning_rate;
    j["optimizer"] = cfg.optimizer == TrainConfig::Optimizer::Adam ? "adam" : "sgd";
    j["adam_beta1"] = cfg.adam_beta1;
    j["adam_beta2"] = cfg.adam_beta2;
    j["adam_eps"] = cfg.adam_eps;
    j["sgd_momentum"] = cfg.sgd_momentum;
    j["resample_each_step"] = cfg.resample_each_step;
    j["power_k"] = cfg.power_k;
    j["n_batch"] = cfg.n_batch;
    return j;
}

TrainConfig config_from_json(const ordered_json& j) {
    TrainConfig cfg;
    cfg.steps = j.at("steps").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.optimizer = j.at("optimizer").get<std::string>() == "sgd" ? TrainConfig::Optimizer::Sgd
                                                                  : TrainConfig::Optimizer::Adam;
    cfg.adam_beta1 = j.at("adam_beta1").get<double>();
    cfg.adam_beta2 = j.at("adam_beta2").get<double>();
    cfg.adam_eps = j.at("adam_eps").get<double>();
    cfg.sgd_momentum = j.at("sgd_momentum").get<double>();
    cfg.resample_each_step = j.at("resample_each_step").get<bool>();
    cfg.power_k = j.at("power_k").get<int>();
    cfg.n_batch = j.at("n_batch").get<int>();
    return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    ordered_json j;
    j["version"] = ck.version;
    j["kind"] = model_name(ck.kind);
    j["problem"] = ck.problem;
    j["train_J"] = ck.train_J;
    j["seed"] = ck.seed;
    ordered_json kernels = ordered_json::array();
    for (const auto& [name, kernel] : ck.kernels) {
        ordered_json k;
        k["name"] = name;
        k["size"] = kernel.size();
        k["values"] = kernel.weights();  // row-major, full round-trip precision
        kernels.push_back(std::move(k));
    }
    j["kernels"] = std::move(kernels);
    j["loss_history"] = ck.loss_history;
    j["final_loss"] = ck.final_loss;
    j["diverged"] = ck.diverged;
    j["config"] = config_json(ck.config);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot read " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("load_checkpoint: malformed file: " + std::string(e.what()));
    }
    Checkpoint ck;
    ck.version = j.at("version").get<int>();
    if (ck.version != 1) throw std::runtime_error("load_checkpoint: unsupported version");
    ck.kind = model_by_name(j.at("kind").get<std::string>());
    ck.problem = j.at("problem").get<std::string>();
    ck.train_J = j.at("train_J").get<int>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& k : j.at("kernels")) {
        const int size = k.at("size").get<int>();
        std::vector<double> values = k.at("values").get<std::vector<double>>();
        ck.kernels.emplace_back(k.at("name").get<std::string>(), Kernel(size, std::move(values)));
    }
    ck.loss_history = j.at("loss_history").get<std::vector<double>>();
    ck.final_loss = j.at("final_loss").get<double>();
    ck.diverged = j.at("diverged").get<bool>();
    ck.config = config_from_json(j.at("config"));
    // reject kernel lists that do not match the kind before anyone builds it
    restore_network(ck);
    return ck;
}

}  // namespace convmg
