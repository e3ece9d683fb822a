#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "convmg/train.hpp"

namespace convmg {

/// One table in the style of the reported results: rows are grid depths J,
/// columns are model kinds, cells are rho1 estimates. A cell at or above 1
/// (or non-finite) is the divergence sentinel and renders as "-".
struct TableReport {
    std::string problem;
    std::vector<int> Js;
    std::vector<std::string> models;
    std::vector<std::vector<double>> cells;  // [J index][model index]
    std::uint64_t eval_seed = 0;
    std::vector<int> trained_J;  // per model column
    std::vector<std::string> notes;

    double cell(int J, const std::string& model) const;
    bool is_sentinel(int row, int col) const;
};

/// Stable CSV schema: header J,model,problem,rho1,seed,trained_J; rho1 in
/// full round-trip precision, "-" for sentinel cells.
std::string table_to_csv(const TableReport& table);
TableReport table_from_csv(const std::string& csv);

/// Markdown rendering with two significant figures, matching the tables'
/// presentation convention.
std::string table_to_markdown(const TableReport& table);

std::string format_rho_full(double rho);  // "-" sentinel or %.17g
std::string format_rho_2sig(double rho);

/// rho1 of a model evaluated at depth J: serialized kinds are rebuilt at J,
/// fixed-size kinds reuse their network unchanged. Median over eval_seeds
/// seeds derived from eval_seed.
double evaluate_at_depth(const MgNetwork& trained, int J, std::uint64_t eval_seed, int eval_seeds,
                         int power_k = 10, int n_batch = 10);

struct ReproduceOptions {
    std::vector<std::string> problems;  // empty = all seven configurations
    int J_min = 3;
    int J_max = 11;
    TrainConfig train;        // train.train_J fixes the training depth
    std::uint64_t eval_seed = 2;
    int eval_seeds = 1;       // median count per cell
    std::string out_dir;      // when set: table_<problem>.{csv,md} + checkpoints
};

/// Trains every trainable kind once per problem, evaluates every kind over
/// the J range, and emits one table per problem. A model whose training
/// diverges is annotated and its cells carry the sentinel.
std::vector<TableReport> run_reproduce(const ReproduceOptions& opts, std::ostream& log);

}  // namespace convmg
