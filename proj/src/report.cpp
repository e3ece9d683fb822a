#include "convmg/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "convmg/spectral.hpp"

namespace convmg {

namespace {

bool sentinel(double rho) { return !std::isfinite(rho) || rho >= 1.0; }

}  // namespace

double TableReport::cell(int J, const std::string& model) const {
    for (std::size_t r = 0; r < Js.size(); ++r)
        for (std::size_t c = 0; c < models.size(); ++c)
            if (Js[r] == J && models[c] == model) return cells[r][c];
    throw std::out_of_range("TableReport::cell: no such row/column");
}

bool TableReport::is_sentinel(int row, int col) const { return sentinel(cells[row][col]); }

std::string format_rho_full(double rho) {
    if (sentinel(rho)) return "-";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", rho);
    return buf;
}

std::string format_rho_2sig(double rho) {
    if (sentinel(rho)) return "-";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2g", rho);
    return buf;
}

std::string table_to_csv(const TableReport& table) {
    std::ostringstream out;
    out << "J,model,problem,rho1,seed,trained_J\n";
    for (std::size_t r = 0; r < table.Js.size(); ++r)
        for (std::size_t c = 0; c < table.models.size(); ++c)
            out << table.Js[r] << ',' << table.models[c] << ',' << table.problem << ','
                << format_rho_full(table.cells[r][c]) << ',' << table.eval_seed << ','
                << table.trained_J[c] << '\n';
    return out.str();
}

TableReport table_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "J,model,problem,rho1,seed,trained_J")
        throw std::invalid_argument("table_from_csv: unexpected header");
    TableReport table;
    struct Row {
        int J;
        std::string model, problem;
        double rho;
        std::uint64_t seed;
        int trained_J;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Row row;
        std::string field;
        std::getline(ls, field, ',');
        row.J = std::stoi(field);
        std::getline(ls, row.model, ',');
        std::getline(ls, row.problem, ',');
        std::getline(ls, field, ',');
        row.rho = field == "-" ? std::numeric_limits<double>::infinity() : std::stod(field);
        std::getline(ls, field, ',');
        row.seed = std::stoull(field);
        std::getline(ls, field, ',');
        row.trained_J = std::stoi(field);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("table_from_csv: no rows");
    table.problem = rows.front().problem;
    table.eval_seed = rows.front().seed;
    for (const Row& row : rows) {
        if (std::find(table.Js.begin(), table.Js.end(), row.J) == table.Js.end())
            table.Js.push_back(row.J);
        if (std::find(table.models.begin(), table.models.end(), row.model) == table.models.end()) {
            table.models.push_back(row.model);
            table.trained_J.push_back(row.trained_J);
        }
    }
    table.cells.assign(table.Js.size(),
                       std::vector<double>(table.models.size(),
                                           std::numeric_limits<double>::quiet_NaN()));
    for (const Row& row : rows) {
        const auto r = std::find(table.Js.begin(), table.Js.end(), row.J) - table.Js.begin();
        const auto c =
            std::find(table.models.begin(), table.models.end(), row.model) - table.models.begin();
        table.cells[r][c] = row.rho;
    }
    return table;
}

std::string table_to_markdown(const TableReport& table) {
    std::ostringstream out;
    out << "### " << table.problem << "\n\n";
    out << "| J |";
    for (const auto& m : table.models) out << ' ' << m << " |";
    out << "\n|---|";
    for (std::size_t c = 0; c < table.models.size(); ++c) out << "---|";
    out << '\n';
    for (std::size_t r = 0; r < table.Js.size(); ++r) {
        out << "| " << table.Js[r] << " |";
        for (std::size_t c = 0; c < table.models.size(); ++c)
            out << ' ' << format_rho_2sig(table.cells[r][c]) << " |";
        out << '\n';
    }
    for (const auto& note : table.notes) out << "\n_" << note << "_\n";
    return out.str();
}

double evaluate_at_depth(const MgNetwork& trained, int J, std::uint64_t eval_seed, int eval_seeds,
                         int power_k, int n_batch) {
    MgNetwork net = instantiate_at(trained, J);
    LossConfig cfg{power_k, n_batch, eval_seed};
    return rho1_median(net, cfg, eval_seeds);
}

std::vector<TableReport> run_reproduce(const ReproduceOptions& opts, std::ostream& log) {
    std::vector<std::string> problems =
        opts.problems.empty() ? problem_names() : opts.problems;
    std::vector<TableReport> tables;
    const bool write = !opts.out_dir.empty();
    if (write) std::filesystem::create_directories(opts.out_dir);

    for (const std::string& pname : problems) {
        ProblemSpec problem = problem_by_name(pname);
        TableReport table;
        table.problem = pname;
        table.eval_seed = opts.eval_seed;
        for (int J = opts.J_min; J <= opts.J_max; ++J) table.Js.push_back(J);

        std::vector<std::optional<MgNetwork>> nets;
        for (ModelKind kind : all_model_kinds()) {
            table.models.push_back(model_name(kind));
            if (!model_trainable(kind)) {
                nets.emplace_back(build_model(kind, opts.train.train_J, problem));
                table.trained_J.push_back(opts.train.train_J);
                continue;
            }
            log << "[reproduce] training " << model_name(kind) << " on " << pname << " (J="
                << opts.train.train_J << ", steps=" << opts.train.steps << ")\n"
                << std::flush;
            Checkpoint ck = train(kind, problem, opts.train);
            table.trained_J.push_back(ck.train_J);
            if (ck.diverged) {
                log << "[reproduce]   training diverged; cells annotated\n";
                table.notes.push_back("training of " + model_name(kind) + " diverged after " +
                                      std::to_string(ck.loss_history.size()) + " steps");
                nets.emplace_back(std::nullopt);
            } else {
                log << "[reproduce]   final rho1 = " << ck.final_loss << "\n" << std::flush;
                nets.emplace_back(restore_network(ck));
            }
            if (write && nets.back()) {
                save_checkpoint(ck, opts.out_dir + "/ck_" + model_name(kind) + "_" + pname +
                                        ".json");
            }
        }

        table.cells.assign(table.Js.size(),
                           std::vector<double>(table.models.size(),
                                               std::numeric_limits<double>::infinity()));
        for (std::size_t c = 0; c < nets.size(); ++c) {
            if (!nets[c]) continue;
            for (std::size_t r = 0; r < table.Js.size(); ++r) {
                table.cells[r][c] = evaluate_at_depth(*nets[c], table.Js[r], opts.eval_seed,
                                                      opts.eval_seeds, opts.train.power_k,
                                                      opts.train.n_batch);
                log << "[reproduce] " << pname << " " << table.models[c] << " J=" << table.Js[r]
                    << " rho1=" << format_rho_full(table.cells[r][c]) << "\n"
                    << std::flush;
            }
        }

        if (write) {
            std::ofstream csv(opts.out_dir + "/table_" + pname + ".csv");
            csv << table_to_csv(table);
            std::ofstream md(opts.out_dir + "/table_" + pname + ".md");
            md << table_to_markdown(table);
        }
        tables.push_back(std::move(table));
    }
    return tables;
}

}  // namespace convmg
