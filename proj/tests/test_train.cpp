#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "convmg/train.hpp"
#include "test_helpers.hpp"

using namespace convmg;

namespace {

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.steps = 120;
    cfg.learning_rate = 1e-2;
    cfg.train_J = 3;
    cfg.seed = 11;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("zero training steps return the initialization") {
    TrainConfig cfg = quick_config();
    cfg.steps = 0;
    Checkpoint ck = train(ModelKind::S1MG_S, problem_by_name("p5"), cfg);
    REQUIRE(ck.kernels.size() == 1);
    CHECK(ck.kernels[0].first == "w_tilde");
    Kernel init = bilinear_kernel();
    for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) CHECK(ck.kernels[0].second(p, q) == init(p, q));
    CHECK(ck.loss_history.empty());
}

TEST_CASE("a short run reduces the loss from initialization") {
    TrainConfig cfg = quick_config();
    Checkpoint ck = train(ModelKind::S1MG_S, problem_by_name("p5"), cfg);
    REQUIRE_FALSE(ck.diverged);
    REQUIRE(ck.loss_history.size() == 120);
    CHECK(ck.final_loss < ck.loss_history.front());
    CHECK(ck.final_loss < 0.5);  // well below the ~1.0 starting point at J=3
}

TEST_CASE("training is deterministic given the config") {
    TrainConfig cfg = quick_config();
    cfg.steps = 25;
    Checkpoint a = train(ModelKind::S3MG_S, problem_by_name("mixed14"), cfg);
    Checkpoint b = train(ModelKind::S3MG_S, problem_by_name("mixed14"), cfg);
    CHECK(a.final_loss == b.final_loss);
    REQUIRE(a.kernels.size() == b.kernels.size());
    for (std::size_t i = 0; i < a.kernels.size(); ++i)
        for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
                CHECK(a.kernels[i].second(p, q) == b.kernels[i].second(p, q));
}

TEST_CASE("non-trainable or out-of-range requests are rejected") {
    TrainConfig cfg = quick_config();
    CHECK_THROWS_AS(train(ModelKind::LMG, problem_by_name("p5"), cfg), std::invalid_argument);
    cfg.train_J = 6;
    CHECK_THROWS_AS(train(ModelKind::S1MG_S, problem_by_name("p5"), cfg), std::invalid_argument);
}

TEST_CASE("named gradients carry the trainable kernel names") {
    MgNetwork net = build_model(ModelKind::S3MG_S, 3, problem_by_name("p5"));
    LossConfig cfg;
    cfg.seed = 5;
    auto named = gradient(net, cfg);
    REQUIRE(named.size() == 3);
    CHECK(named[0].first == "w_tilde_1");
    CHECK(named[2].first == "w_tilde_3");
    MgNetwork lmg = build_model(ModelKind::LMG, 3, problem_by_name("p5"));
    CHECK_THROWS_AS(gradient(lmg, cfg), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip byte-identically") {
    TrainConfig cfg = quick_config();
    cfg.steps = 10;
    Checkpoint ck = train(ModelKind::S1MG_RS, problem_by_name("aniso2"), cfg);
    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string p1 = dir + "/convmg_ck1.json";
    const std::string p2 = dir + "/convmg_ck2.json";
    save_checkpoint(ck, p1);
    Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(read_file(p1) == read_file(p2));
    CHECK(loaded.final_loss == ck.final_loss);
    CHECK(loaded.kernels.size() == ck.kernels.size());
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST_CASE("restored networks reproduce the recorded final loss exactly") {
    TrainConfig cfg = quick_config();
    cfg.steps = 30;
    Checkpoint ck = train(ModelKind::S1MG_S, problem_by_name("p5"), cfg);
    MgNetwork net = restore_network(ck);
    LossConfig eval{cfg.power_k, cfg.n_batch, eval_seed_for(cfg.seed)};
    CHECK(loss(net, eval) == ck.final_loss);
}

TEST_CASE("tampered checkpoints are rejected") {
    TrainConfig cfg = quick_config();
    cfg.steps = 0;
    Checkpoint ck = train(ModelKind::S3MG_S, problem_by_name("p5"), cfg);

    Checkpoint missing = ck;
    missing.kernels.pop_back();
    CHECK_THROWS_AS(restore_network(missing), std::invalid_argument);

    Checkpoint renamed = ck;
    renamed.kernels[0].first = "w_tilde_7";
    CHECK_THROWS_AS(restore_network(renamed), std::invalid_argument);

    Checkpoint wrong_size = ck;
    wrong_size.kernels[0].second = Kernel(5);
    CHECK_THROWS_AS(restore_network(wrong_size), std::invalid_argument);

    const std::string path = std::filesystem::temp_directory_path().string() + "/convmg_bad.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS(load_checkpoint(path));
    std::filesystem::remove(path);
}

TEST_CASE("a J=3 checkpoint evaluates at deeper grids through serialization") {
    TrainConfig cfg = quick_config();
    cfg.steps = 40;
    Checkpoint ck = train(ModelKind::S1MG_S, problem_by_name("p5"), cfg);
    MgNetwork net = restore_network(ck);
    MgNetwork deep = serialize_to_depth(net, 5);
    LossConfig eval{10, 10, eval_seed_for(cfg.seed)};
    const double rho = loss(deep, eval);
    CHECK(std::isfinite(rho));
    CHECK(deep.trained_J == 3);
}

TEST_CASE("divergence aborts with a partial checkpoint") {
    TrainConfig cfg = quick_config();
    cfg.steps = 50;
    cfg.learning_rate = 1e12;  // guaranteed blow-up
    Checkpoint ck = train(ModelKind::S1MG_RS, problem_by_name("p5"), cfg);
    CHECK(ck.diverged);
    CHECK(ck.loss_history.size() < 50);
    CHECK(std::isinf(ck.loss_history.back()));
}
