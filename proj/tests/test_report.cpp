#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "convmg/report.hpp"
#include "convmg/spectral.hpp"
#include "test_helpers.hpp"

using namespace convmg;

TEST_CASE("rho formatting: full precision, two significant figures, sentinel") {
    CHECK(format_rho_full(0.125) == "0.125");
    CHECK(std::stod(format_rho_full(0.10471975511965977)) == 0.10471975511965977);
    CHECK(format_rho_full(1.0) == "-");
    CHECK(format_rho_full(2.7) == "-");
    CHECK(format_rho_full(std::numeric_limits<double>::infinity()) == "-");
    CHECK(format_rho_2sig(0.10471975511965977) == "0.1");
    CHECK(format_rho_2sig(0.2377) == "0.24");
    CHECK(format_rho_2sig(1.2) == "-");
}

TEST_CASE("tables round-trip through CSV losslessly") {
    TableReport table;
    table.problem = "p5";
    table.eval_seed = 42;
    table.Js = {3, 4};
    table.models = {"lmg", "s1mg_s"};
    table.trained_J = {5, 5};
    table.cells = {{0.11234567890123456, 0.046}, {1.25, 0.05}};
    const std::string csv = table_to_csv(table);
    CHECK(csv.rfind("J,model,problem,rho1,seed,trained_J\n", 0) == 0);
    TableReport back = table_from_csv(csv);
    CHECK(back.problem == table.problem);
    CHECK(back.Js == table.Js);
    CHECK(back.models == table.models);
    CHECK(back.cells[0][0] == table.cells[0][0]);  // full precision survives
    CHECK(back.cells[0][1] == table.cells[0][1]);
    CHECK(back.is_sentinel(1, 0));                 // 1.25 renders "-" and stays sentinel
    CHECK(table_to_csv(back) == csv);              // fixed point of the round trip
}

TEST_CASE("markdown rendering uses the sentinel and two significant figures") {
    TableReport table;
    table.problem = "aniso10";
    table.Js = {8};
    table.models = {"lmg"};
    table.trained_J = {8};
    table.cells = {{1.0157}};
    const std::string md = table_to_markdown(table);
    CHECK(md.find("| 8 | - |") != std::string::npos);
}

TEST_CASE("evaluate_at_depth equals a direct evaluation of a fresh network") {
    MgNetwork lmg = build_model(ModelKind::LMG, 3, problem_by_name("p5"));
    const double got = evaluate_at_depth(lmg, 4, 77, 1);
    MgNetwork fresh = build_model(ModelKind::LMG, 4, problem_by_name("p5"));
    LossConfig cfg{10, 10, derive_seed(77, 0)};
    CHECK(got == loss(fresh, cfg));
}

TEST_CASE("run_reproduce emits complete tables and files") {
    ReproduceOptions opts;
    opts.problems = {"p5"};
    opts.J_min = 3;
    opts.J_max = 4;
    opts.train.steps = 5;
    opts.train.train_J = 3;
    opts.train.seed = 3;
    opts.eval_seed = 4;
    const std::string dir =
        (std::filesystem::temp_directory_path() / "convmg_repro_test").string();
    opts.out_dir = dir;
    std::ostringstream log;
    std::vector<TableReport> tables = run_reproduce(opts, log);
    REQUIRE(tables.size() == 1);
    const TableReport& t = tables[0];
    CHECK(t.models.size() == 6);
    CHECK(t.Js.size() == 2);
    for (const auto& row : t.cells)
        for (double v : row) CHECK_FALSE(std::isnan(v));
    CHECK(std::filesystem::exists(dir + "/table_p5.csv"));
    CHECK(std::filesystem::exists(dir + "/table_p5.md"));
    CHECK(std::filesystem::exists(dir + "/ck_s1mg_s_p5.json"));
    // CSV on disk parses back into the same cells
    std::ifstream in(dir + "/table_p5.csv");
    std::ostringstream buf;
    buf << in.rdbuf();
    TableReport parsed = table_from_csv(buf.str());
    for (std::size_t r = 0; r < t.Js.size(); ++r)
        for (std::size_t c = 0; c < t.models.size(); ++c) {
            if (t.is_sentinel(r, c))
                CHECK(parsed.is_sentinel(r, c));
            else
                CHECK(parsed.cells[r][c] == t.cells[r][c]);
        }
    std::filesystem::remove_all(dir);
}
