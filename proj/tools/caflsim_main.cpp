// caflsim: budget-constrained federated training simulator.
//
// Subcommands:
//   run           train under the configured mode, writing a per-round
//                 metrics CSV (flushed every round) and a JSON summary
//   compare       final-window comparison table of two metrics CSVs
//   print-config  emit the fully resolved configuration

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cafl/config.hpp"
#include "cafl/fedsim.hpp"

namespace {

cafl::ExperimentConfig resolve_config(const std::string& config_path,
                                      const std::vector<std::string>& sets) {
    if (config_path.empty()) {
        return cafl::config_from_overrides(sets);
    }
    return cafl::parse_config(config_path, sets);
}

int cmd_run(const cafl::ExperimentConfig& cfg) {
    cafl::Federation fed(cfg);

    std::ofstream csv(cfg.out, std::ios::binary);
    if (!csv) {
        throw std::runtime_error("run: cannot open output file: " + cfg.out);
    }
    csv << cafl::kMetricsCsvHeader << "\n";
    csv.flush();

    std::vector<cafl::RoundMetrics> history;
    history.reserve(size_t(cfg.rounds));
    for (int t = 1; t <= cfg.rounds; ++t) {
        const cafl::RoundMetrics m = fed.run_round();
        csv << cafl::metrics_csv_row(m) << "\n";
        csv.flush();  // interrupted runs keep their prefix
        std::printf("round %d/%d  val_loss %.4f  val_acc %.4f  k=%d s=%d b=%d q=%d ga=%d\n",
                    m.round, cfg.rounds, m.val_loss, m.val_acc, m.knobs.k, m.knobs.s, m.knobs.b,
                    m.knobs.q, m.knobs.grad_accum);
        std::fflush(stdout);
        history.push_back(m);
    }

    std::filesystem::path summary_path(cfg.out);
    summary_path.replace_extension(".summary.json");
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary) {
        throw std::runtime_error("run: cannot open summary file: " + summary_path.string());
    }
    summary << cafl::summary_json(cfg, history, 10);
    std::printf("wrote %s and %s\n", cfg.out.c_str(), summary_path.string().c_str());
    return 0;
}

struct WindowMeans {
    double val_loss = 0.0;
    cafl::UsageVector usage;
};

WindowMeans window_means(const std::vector<cafl::RoundMetrics>& rows, int window) {
    WindowMeans m;
    const size_t n = rows.size();
    for (size_t i = n - size_t(window); i < n; ++i) {
        m.val_loss += rows[i].val_loss;
        m.usage.energy += rows[i].usage.energy;
        m.usage.comm_mb += rows[i].usage.comm_mb;
        m.usage.memory += rows[i].usage.memory;
        m.usage.temperature += rows[i].usage.temperature;
    }
    const double inv = 1.0 / double(window);
    m.val_loss *= inv;
    m.usage.energy *= inv;
    m.usage.comm_mb *= inv;
    m.usage.memory *= inv;
    m.usage.temperature *= inv;
    return m;
}

// Improvement of B relative to A, formatted like the usual summary tables.
std::string change_str(double a, double b) {
    if (a == 0.0) {
        return "n/a";
    }
    const double pct = (a - b) / a * 100.0;
    const long rounded = std::lround(std::abs(pct));
    if (rounded == 0) {
        return "0%";
    }
    return std::to_string(rounded) + "%" + (pct > 0 ? "↓" : "↑");
}

// Budgets are recoverable from any row with a nonzero ratio.
std::string derive_budget(const std::vector<cafl::RoundMetrics>& rows,
                          double cafl::UsageVector::*u, double cafl::RoundMetrics::*r) {
    for (const cafl::RoundMetrics& m : rows) {
        if (m.*r > 0.0) {
            return cafl::format_double((m.usage.*u) / (m.*r));
        }
    }
    return "inf";
}

void write_plot_csv(const std::string& label,
                    const std::vector<cafl::RoundMetrics>& rows, std::ofstream& out) {
    for (const cafl::RoundMetrics& m : rows) {
        auto emit = [&](const std::string& series, const std::string& value) {
            out << m.round << ',' << label << '.' << series << ',' << value << "\n";
        };
        emit("val_loss", cafl::format_double(m.val_loss));
        emit("val_acc", cafl::format_double(m.val_acc));
        emit("u_E", cafl::format_double(m.usage.energy));
        emit("u_C", cafl::format_double(m.usage.comm_mb));
        emit("u_M", cafl::format_double(m.usage.memory));
        emit("u_T", cafl::format_double(m.usage.temperature));
        emit("r_E", cafl::format_double(m.r_energy));
        emit("r_C", cafl::format_double(m.r_comm));
        emit("r_M", cafl::format_double(m.r_memory));
        emit("r_T", cafl::format_double(m.r_temp));
        emit("k", std::to_string(m.knobs.k));
        emit("s", std::to_string(m.knobs.s));
        emit("b", std::to_string(m.knobs.b));
        emit("q", std::to_string(m.knobs.q));
        emit("grad_accum", std::to_string(m.knobs.grad_accum));
        emit("lambda_E", cafl::format_double(m.duals.lambda_energy));
        emit("lambda_C", cafl::format_double(m.duals.lambda_comm));
        emit("lambda_M", cafl::format_double(m.duals.lambda_memory));
        emit("lambda_T", cafl::format_double(m.duals.lambda_temp));
        emit("wire_bytes", std::to_string(m.wire_bytes));
    }
}

int cmd_compare(const std::string& csv_a, const std::string& csv_b, int window,
                const std::string& plot_csv) {
    const std::vector<cafl::RoundMetrics> rows_a = cafl::read_metrics_csv(csv_a);
    const std::vector<cafl::RoundMetrics> rows_b = cafl::read_metrics_csv(csv_b);
    if (int(rows_a.size()) < window || int(rows_b.size()) < window) {
        throw cafl::ConfigError("compare: window (" + std::to_string(window) +
                                ") exceeds the row count of an input (" +
                                std::to_string(rows_a.size()) + ", " +
                                std::to_string(rows_b.size()) + ")");
    }

    const WindowMeans a = window_means(rows_a, window);
    const WindowMeans b = window_means(rows_b, window);

    std::printf("final %d rounds, A = %s, B = %s\n", window, csv_a.c_str(), csv_b.c_str());
    std::printf("%-12s %14s %14s %14s %10s\n", "metric", "budget", "A", "B", "B vs A");
    auto row = [&](const char* name, const std::string& budget, double va, double vb) {
        std::printf("%-12s %14s %14.6g %14.6g %10s\n", name, budget.c_str(), va, vb,
                    change_str(va, vb).c_str());
    };
    row("energy", derive_budget(rows_a, &cafl::UsageVector::energy, &cafl::RoundMetrics::r_energy),
        a.usage.energy, b.usage.energy);
    row("comm_mb", derive_budget(rows_a, &cafl::UsageVector::comm_mb, &cafl::RoundMetrics::r_comm),
        a.usage.comm_mb, b.usage.comm_mb);
    row("memory", derive_budget(rows_a, &cafl::UsageVector::memory, &cafl::RoundMetrics::r_memory),
        a.usage.memory, b.usage.memory);
    row("temperature",
        derive_budget(rows_a, &cafl::UsageVector::temperature, &cafl::RoundMetrics::r_temp),
        a.usage.temperature, b.usage.temperature);
    row("val_loss", "-", a.val_loss, b.val_loss);

    if (!plot_csv.empty()) {
        std::ofstream out(plot_csv, std::ios::binary);
        if (!out) {
            throw std::runtime_error("compare: cannot open plot output: " + plot_csv);
        }
        out << "round,series,value\n";
        write_plot_csv("A", rows_a, out);
        write_plot_csv("B", rows_b, out);
        std::printf("wrote %s\n", plot_csv.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"budget-constrained federated training simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::string out_path;
    std::string mode;
    std::string seed;

    auto add_config_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "configuration file (key = value lines)");
        cmd->add_option("--set", sets, "override, repeatable: KEY=VALUE")->take_all();
        cmd->add_option("--out", out_path, "metrics CSV path");
        cmd->add_option("--mode", mode, "cafl or fedavg")
            ->check(CLI::IsMember({"cafl", "fedavg"}));
        cmd->add_option("--seed", seed, "master seed");
    };

    CLI::App* run = app.add_subcommand("run", "run an experiment");
    add_config_flags(run);

    CLI::App* print = app.add_subcommand("print-config", "emit the resolved configuration");
    add_config_flags(print);

    std::string csv_a;
    std::string csv_b;
    int window = 10;
    std::string plot_csv;
    CLI::App* compare = app.add_subcommand("compare", "compare two metrics CSVs");
    compare->add_option("csv_a", csv_a, "baseline run CSV")->required();
    compare->add_option("csv_b", csv_b, "candidate run CSV")->required();
    compare->add_option("--window", window, "final rounds to average")
        ->check(CLI::PositiveNumber);
    compare->add_option("--plot-csv", plot_csv, "tidy long-format CSV for external plotting");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed() || print->parsed()) {
            if (!out_path.empty()) sets.push_back("out=" + out_path);
            if (!mode.empty()) sets.push_back("mode=" + mode);
            if (!seed.empty()) sets.push_back("seed=" + seed);
            const cafl::ExperimentConfig cfg = resolve_config(config_path, sets);
            if (print->parsed()) {
                std::cout << cafl::serialize_config(cfg);
                return 0;
            }
            return cmd_run(cfg);
        }
        return cmd_compare(csv_a, csv_b, window, plot_csv);
    } catch (const cafl::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
