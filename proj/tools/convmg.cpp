// convmg: train and evaluate convolutional multigrid solvers, regenerate
// the per-problem convergence tables, and run the oracle cross-check suites.
#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

#include "convmg/gradient.hpp"
#include "convmg/oracle.hpp"
#include "convmg/report.hpp"
#include "convmg/train.hpp"

using namespace convmg;

namespace {

std::pair<int, int> parse_j_range(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        const int J = std::stoi(spec);
        return {J, J};
    }
    return {std::stoi(spec.substr(0, colon)), std::stoi(spec.substr(colon + 1))};
}

int cmd_train(const std::string& problem, const std::string& model, int J, int steps, double lr,
              std::uint64_t seed, const std::string& out, const std::string& optimizer,
              double momentum, bool no_resample, int power_k, int n_batch) {
    TrainConfig cfg;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.train_J = J;
    cfg.seed = seed;
    cfg.resample_each_step = !no_resample;
    cfg.power_k = power_k;
    cfg.n_batch = n_batch;
    cfg.sgd_momentum = momentum;
    cfg.optimizer =
        optimizer == "sgd" ? TrainConfig::Optimizer::Sgd : TrainConfig::Optimizer::Adam;
    Checkpoint ck = train(model_by_name(model), problem_by_name(problem), cfg);
    if (!ck.loss_history.empty()) {
        const int stride = std::max<int>(1, static_cast<int>(ck.loss_history.size()) / 10);
        for (std::size_t i = 0; i < ck.loss_history.size(); i += stride)
            std::cout << "step " << i << ": rho1 = " << format_rho_full(ck.loss_history[i])
                      << "\n";
        std::cout << "step " << ck.loss_history.size() - 1
                  << ": rho1 = " << format_rho_full(ck.loss_history.back()) << "\n";
    }
    std::cout << "final rho1 (fresh seed) = " << ck.final_loss << "\n";
    save_checkpoint(ck, out);
    std::cout << "checkpoint written to " << out << "\n";
    if (ck.diverged) {
        std::cerr << "training diverged after " << ck.loss_history.size() << " steps\n";
        return 2;
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& model, const std::string& problem,
             const std::string& j_range, std::uint64_t seed, int seeds, int power_k, int n_batch,
             const std::string& out_path) {
    MgNetwork net = [&] {
        if (!checkpoint.empty()) return restore_network(load_checkpoint(checkpoint));
        if (model.empty() || problem.empty())
            throw CLI::ValidationError("eval needs --checkpoint or both --model and --problem");
        return build_model(model_by_name(model), 5, problem_by_name(problem));
    }();
    const auto [j_lo, j_hi] = parse_j_range(j_range);
    if (j_lo < 2 || j_hi < j_lo) throw CLI::ValidationError("bad --J range");
    std::ostringstream csv;
    csv << "J,model,problem,rho1,seed,trained_J\n";
    for (int J = j_lo; J <= j_hi; ++J) {
        const double rho = evaluate_at_depth(net, J, seed, seeds, power_k, n_batch);
        csv << J << ',' << model_name(net.kind) << ',' << net.problem.name << ','
            << format_rho_full(rho) << ',' << seed << ',' << net.trained_J << '\n';
    }
    if (out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(out_path);
        out << csv.str();
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_reproduce(const std::string& problem, const std::string& out_dir, int train_J, int steps,
                  double lr, std::uint64_t train_seed, std::uint64_t eval_seed, int eval_seeds,
                  int j_min, int j_max) {
    ReproduceOptions opts;
    if (problem != "all") opts.problems = {problem};
    opts.J_min = j_min;
    opts.J_max = j_max;
    opts.train.train_J = train_J;
    opts.train.steps = steps;
    opts.train.learning_rate = lr;
    opts.train.seed = train_seed;
    opts.eval_seed = eval_seed;
    opts.eval_seeds = eval_seeds;
    opts.out_dir = out_dir;
    std::vector<TableReport> tables = run_reproduce(opts, std::cerr);
    for (const TableReport& t : tables) std::cout << table_to_markdown(t) << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& model, const std::string& problem, int J,
                  std::uint64_t seed) {
    const std::vector<std::string> models =
        model == "all" ? std::vector<std::string>{"s1mg_rs", "s1mg_s", "s3mg_s", "unet", "fmg"}
                       : std::vector<std::string>{model};
    const std::vector<std::string> problems =
        problem == "all" ? std::vector<std::string>{"p5", "mixed34"}
                         : std::vector<std::string>{problem};
    double worst = 0.0;
    for (const auto& pname : problems) {
        for (const auto& mname : models) {
            MgNetwork net = build_model(model_by_name(mname), J, problem_by_name(pname));
            LossConfig cfg;
            cfg.seed = seed;
            LossAndGrad lg = loss_and_gradient(net, cfg);
            if (!lg.finite) {
                std::cerr << "non-finite loss for " << mname << "/" << pname << "\n";
                return 1;
            }
            for (int idx : net.params.trainable_indices()) {
                const Kernel& k0 = net.params.kernels[idx];
                Kernel fd(k0.size());
                double gmax = 0.0;
                for (int p = 0; p < k0.size(); ++p)
                    for (int q = 0; q < k0.size(); ++q) {
                        const double h = 1e-5;
                        const double saved = net.params.kernels[idx](p, q);
                        net.params.kernels[idx](p, q) = saved + h;
                        net.prepare();
                        const double up = loss(net, cfg);
                        net.params.kernels[idx](p, q) = saved - h;
                        net.prepare();
                        const double down = loss(net, cfg);
                        net.params.kernels[idx](p, q) = saved;
                        net.prepare();
                        fd(p, q) = (up - down) / (2.0 * h);
                        gmax = std::max(gmax, std::abs(fd(p, q)));
                    }
                double rel = 0.0;
                for (int p = 0; p < k0.size(); ++p)
                    for (int q = 0; q < k0.size(); ++q) {
                        const double denom = std::max({std::abs(fd(p, q)), 0.01 * gmax, 1e-6});
                        rel = std::max(rel, std::abs(lg.grads[idx](p, q) - fd(p, q)) / denom);
                    }
                std::cout << pname << " " << mname << " " << net.params.names[idx]
                          << ": max rel err = " << rel << "\n";
                worst = std::max(worst, rel);
            }
        }
    }
    std::cout << "worst relative error: " << worst << (worst < 1e-5 ? "  (pass)" : "  (FAIL)")
              << "\n";
    return worst < 1e-5 ? 0 : 1;
}

int cmd_oracle(std::uint64_t seed) {
    double worst_spectral = 0.0, worst_galerkin = 0.0;
    for (const auto& pname : problem_names()) {
        ProblemSpec problem = problem_by_name(pname);
        for (int J : {2, 3}) {
            MgNetwork net = build_model(ModelKind::LMG, J, problem);
            const int n = net.fine_side();
            DenseOperator b = assemble(
                [&](const GridField& z) { return net.apply_error_propagation(z); }, n, n);
            const double exact = exact_spectral_radius(b);
            LossConfig cfg;
            cfg.seed = seed;
            const double est = loss(net, cfg);
            const double diff = std::abs(est - exact);
            std::cout << pname << " J=" << J << ": rho1 = " << est << ", exact = " << exact
                      << ", |diff| = " << diff << "\n";
            worst_spectral = std::max(worst_spectral, diff);

            // Galerkin cross-check: probed level-2 operator vs dense product
            DenseOperator a1 = assemble(
                [&](const GridField& x) { return apply_fine_operator(problem, x); }, n, n);
            const int m = net.side_at(2);
            double galerkin_diff = 0.0;
            for (int col = 0; col < m * m; ++col) {
                GridField e(m, m);
                e.data()[col] = 1.0;
                GridField via_chain = net.apply_level(2, e);
                GridField up = conv_up(e, net.kernel_at(net.levels[0].restriction),
                                       net.levels[0].stride, n, n);
                GridField via_dense = conv_down(a1.apply(up),
                                                net.kernel_at(net.levels[0].restriction),
                                                net.levels[0].stride);
                for (int row = 0; row < m * m; ++row)
                    galerkin_diff = std::max(
                        galerkin_diff, std::abs(via_chain.data()[row] - via_dense.data()[row]));
            }
            worst_galerkin = std::max(worst_galerkin, galerkin_diff);
        }
    }
    std::cout << "worst |rho1 - rho_exact| = " << worst_spectral
              << (worst_spectral <= 0.03 ? "  (pass <= 0.03)" : "  (FAIL > 0.03)") << "\n";
    std::cout << "worst Galerkin mismatch = " << worst_galerkin
              << (worst_galerkin <= 1e-12 ? "  (pass <= 1e-12)" : "  (FAIL > 1e-12)") << "\n";
    return (worst_spectral <= 0.03 && worst_galerkin <= 1e-12) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"convolutional multigrid solvers with trainable kernels"};
    app.require_subcommand(1);

    // train
    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string tr_problem, tr_model, tr_out = "checkpoint.json", tr_opt = "adam";
    int tr_J = 5, tr_steps = 4000, tr_k = 10, tr_batch = 10;
    double tr_lr = 3e-3, tr_momentum = 0.9;
    std::uint64_t tr_seed = 1;
    bool tr_noresample = false;
    tr->add_option("--problem", tr_problem, "p5|p9|pm|aniso2|aniso10|mixed14|mixed34")->required();
    tr->add_option("--model", tr_model, "s1mg_rs|s1mg_s|s3mg_s|unet|fmg")->required();
    tr->add_option("--J", tr_J, "training grid depth (2..5)");
    tr->add_option("--steps", tr_steps, "optimization steps");
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--seed", tr_seed, "training seed");
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--optimizer", tr_opt, "adam|sgd");
    tr->add_option("--momentum", tr_momentum, "sgd momentum");
    tr->add_flag("--no-resample", tr_noresample, "freeze the estimator batch across steps");
    tr->add_option("--power-k", tr_k, "estimator power k");
    tr->add_option("--n-batch", tr_batch, "estimator batch size");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate rho1 over a range of J");
    std::string ev_ck, ev_model, ev_problem, ev_J = "3:11", ev_out;
    std::uint64_t ev_seed = 2;
    int ev_seeds = 1, ev_k = 10, ev_batch = 10;
    ev->add_option("--checkpoint", ev_ck, "trained checkpoint to evaluate");
    ev->add_option("--model", ev_model, "builtin model (evaluated at its initialization)");
    ev->add_option("--problem", ev_problem, "problem name (with --model)");
    ev->add_option("--J", ev_J, "depth or range, e.g. 8 or 3:11");
    ev->add_option("--seed", ev_seed, "evaluation seed");
    ev->add_option("--seeds", ev_seeds, "median over this many derived seeds");
    ev->add_option("--power-k", ev_k, "estimator power k");
    ev->add_option("--n-batch", ev_batch, "estimator batch size");
    ev->add_option("--out", ev_out, "CSV output path (default stdout)");

    // reproduce
    auto* rp = app.add_subcommand("reproduce", "train all kinds and emit per-problem tables");
    std::string rp_problem = "all", rp_dir = "tables";
    int rp_trainJ = 5, rp_steps = 4000, rp_seeds = 1, rp_jmin = 3, rp_jmax = 11;
    double rp_lr = 3e-3;
    std::uint64_t rp_train_seed = 1, rp_eval_seed = 2;
    rp->add_option("--problem", rp_problem, "problem name or 'all'");
    rp->add_option("--out-dir", rp_dir, "output directory for CSV/markdown/checkpoints");
    rp->add_option("--train-J", rp_trainJ, "training depth");
    rp->add_option("--steps", rp_steps, "training steps per model");
    rp->add_option("--lr", rp_lr, "learning rate");
    rp->add_option("--train-seed", rp_train_seed, "training seed");
    rp->add_option("--eval-seed", rp_eval_seed, "evaluation seed (differs from training)");
    rp->add_option("--eval-seeds", rp_seeds, "median count per table cell");
    rp->add_option("--J-min", rp_jmin, "first table row");
    rp->add_option("--J-max", rp_jmax, "last table row");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "reverse mode vs finite differences");
    std::string gc_model = "all", gc_problem = "all";
    int gc_J = 3;
    std::uint64_t gc_seed = 7;
    gc->add_option("--model", gc_model, "model name or 'all'");
    gc->add_option("--problem", gc_problem, "problem name or 'all' (p5 and mixed34)");
    gc->add_option("--J", gc_J, "grid depth (keep <= 3)");
    gc->add_option("--seed", gc_seed, "estimator seed");

    // oracle
    auto* oc = app.add_subcommand("oracle", "dense-oracle cross-checks at J <= 3");
    std::uint64_t oc_seed = 2;
    oc->add_option("--seed", oc_seed, "estimator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tr->parsed())
            return cmd_train(tr_problem, tr_model, tr_J, tr_steps, tr_lr, tr_seed, tr_out, tr_opt,
                             tr_momentum, tr_noresample, tr_k, tr_batch);
        if (ev->parsed())
            return cmd_eval(ev_ck, ev_model, ev_problem, ev_J, ev_seed, ev_seeds, ev_k, ev_batch,
                            ev_out);
        if (rp->parsed())
            return cmd_reproduce(rp_problem, rp_dir, rp_trainJ, rp_steps, rp_lr, rp_train_seed,
                                 rp_eval_seed, rp_seeds, rp_jmin, rp_jmax);
        if (gc->parsed()) return cmd_gradcheck(gc_model, gc_problem, gc_J, gc_seed);
        if (oc->parsed()) return cmd_oracle(oc_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
