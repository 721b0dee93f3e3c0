// Acceptance suite: runs every acceptance criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cafl/config.hpp"
#include "cafl/fedsim.hpp"
#include "cafl/rng.hpp"
#include "cafl/wire.hpp"

using namespace cafl;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return std::string(buf);
}

Batch random_batch(const ModelConfig& cfg, int batch_size, Rng& rng) {
    Batch b;
    b.batch_size = batch_size;
    b.context_window = cfg.context_window;
    for (int i = 0; i < batch_size * cfg.context_window; ++i) {
        b.contexts.push_back(int(rng.next_index(size_t(cfg.vocab_size))));
    }
    for (int i = 0; i < batch_size; ++i) {
        b.targets.push_back(int(rng.next_index(size_t(cfg.vocab_size))));
    }
    return b;
}

double loss_of(const ModelParams& params, const Batch& batch) {
    ForwardCache cache;
    return forward_loss(params, batch, cache);
}

// --- criterion 1: analytic gradients vs central finite differences ----------

void criterion_1() {
    const double t0 = now_seconds();
    Rng rng(314159);
    int instances = 0;
    int checked = 0;
    double worst = 0.0;
    bool ok = true;

    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg;
        cfg.vocab_size = 3 + int(rng.next_index(18));
        cfg.embed_dim = cfg.hidden_dim = 2 + int(rng.next_index(11));
        cfg.n_blocks = 1 + int(rng.next_index(4));
        cfg.context_window = 1 + int(rng.next_index(6));
        const int k = 1 + int(rng.next_index(size_t(cfg.n_blocks)));
        const ModelParams p = init_model(cfg, rng.next_u64());
        const Batch batch = random_batch(cfg, 1 + int(rng.next_index(5)), rng);

        ForwardCache cache;
        forward_loss(p, batch, cache);
        const Gradients g = backward(p, cache, k);
        ++instances;

        for (int ti = 0; ti < p.tensor_count(); ++ti) {
            if (!tensor_unfrozen(ti, cfg.n_blocks, k)) continue;
            for (int probe = 0; probe < 10; ++probe) {
                const size_t e = rng.next_index(p.tensor(ti).count());
                ModelParams plus = p;
                plus.tensor(ti).a[e] += 1e-4;
                ModelParams minus = p;
                minus.tensor(ti).a[e] -= 1e-4;
                const double numeric = (loss_of(plus, batch) - loss_of(minus, batch)) / 2e-4;
                const double analytic = g.tensor(ti).a[e];
                const double diff = std::abs(analytic - numeric);
                const double scale = std::max(std::abs(analytic), std::abs(numeric));
                const double rel = (scale > 1e-6) ? diff / scale : 0.0;
                worst = std::max(worst, rel);
                if (diff > 1e-4 * scale && diff > 1e-9) ok = false;
                ++checked;
            }
        }
    }
    const double dt = now_seconds() - t0;
    ok = ok && dt < 10.0;
    report(1, ok,
           fmt("gradient correctness: %d instances, %d coordinates, max rel err %.2e, %.1f s",
               instances, checked, worst, dt));
}

// --- shared 50-round runs ----------------------------------------------------

struct RunOutput {
    ExperimentConfig cfg;
    std::vector<RoundMetrics> history;
    int vocab_size = 0;
};

RunOutput full_run(const std::string& mode, const std::string& csv_path) {
    RunOutput out;
    out.cfg = config_from_overrides({"mode=" + mode, "threads=2", "out=" + csv_path});
    Federation fed(out.cfg);
    out.vocab_size = fed.data().corpus.vocab_size;

    std::ofstream csv(csv_path, std::ios::binary);
    csv << kMetricsCsvHeader << "\n";
    for (int t = 0; t < out.cfg.rounds; ++t) {
        out.history.push_back(fed.run_round());
        csv << metrics_csv_row(out.history.back()) << "\n";
    }
    return out;
}

double tail_mean(const std::vector<RoundMetrics>& h, int window,
                 double (*get)(const RoundMetrics&)) {
    double sum = 0.0;
    for (size_t i = h.size() - size_t(window); i < h.size(); ++i) sum += get(h[i]);
    return sum / double(window);
}

void criteria_2_3_4_5(const RunOutput& cafl, const RunOutput& fedavg, double run_seconds) {
    const int w = 10;

    // criterion 2: constraint satisfaction
    const double c_e = tail_mean(cafl.history, w, [](const RoundMetrics& m) { return m.r_energy; });
    const double c_c = tail_mean(cafl.history, w, [](const RoundMetrics& m) { return m.r_comm; });
    const double c_m = tail_mean(cafl.history, w, [](const RoundMetrics& m) { return m.r_memory; });
    const double c_t = tail_mean(cafl.history, w, [](const RoundMetrics& m) { return m.r_temp; });
    const double f_e =
        tail_mean(fedavg.history, w, [](const RoundMetrics& m) { return m.r_energy; });
    const double f_c = tail_mean(fedavg.history, w, [](const RoundMetrics& m) { return m.r_comm; });
    const bool c2 = c_e <= 1.05 && c_c <= 1.05 && c_m <= 1.05 && c_t <= 1.05 && f_c >= 2.0 &&
                    f_e >= 2.0 && run_seconds < 300.0;
    report(2, c2,
           fmt("constraint satisfaction: cafl final-10 ratios E %.3f C %.3f M %.3f T %.3f "
               "(all <= 1.05), fedavg E %.2fx C %.2fx (>= 2x), runs took %.0f s",
               c_e, c_c, c_m, c_t, f_e, f_c, run_seconds));

    // criterion 3: communication reduction over rounds 41-50
    long long cafl_bytes = 0;
    long long fedavg_bytes = 0;
    for (size_t i = cafl.history.size() - size_t(w); i < cafl.history.size(); ++i) {
        cafl_bytes += cafl.history[i].wire_bytes;
        fedavg_bytes += fedavg.history[i].wire_bytes;
    }
    const double reduction = 1.0 - double(cafl_bytes) / double(fedavg_bytes);
    report(3, reduction >= 0.80,
           fmt("communication reduction: %lld vs %lld wire bytes over the final 10 rounds "
               "(%.1f%% lower, need >= 80%%)",
               cafl_bytes, fedavg_bytes, 100.0 * reduction));

    // criterion 4: competitive convergence
    const double cafl_loss =
        tail_mean(cafl.history, w, [](const RoundMetrics& m) { return m.val_loss; });
    const double fedavg_loss =
        tail_mean(fedavg.history, w, [](const RoundMetrics& m) { return m.val_loss; });
    const double uniform = std::log(double(cafl.vocab_size));
    const bool c4 = cafl_loss <= 1.25 * fedavg_loss && cafl_loss < uniform &&
                    fedavg_loss < uniform;
    report(4, c4,
           fmt("convergence: cafl %.4f vs fedavg %.4f (ratio %.3f <= 1.25), uniform %.4f",
               cafl_loss, fedavg_loss, cafl_loss / fedavg_loss, uniform));

    // criterion 5: token-budget invariant on the logged CSVs
    bool c5 = true;
    int rows = 0;
    for (const RunOutput* run : {&cafl, &fedavg}) {
        const std::vector<RoundMetrics> logged = read_metrics_csv(run->cfg.out);
        const long long target = (long long)run->cfg.s_base * run->cfg.b_base;
        for (const RoundMetrics& m : logged) {
            const long long consumed = (long long)m.knobs.grad_accum * m.knobs.s * m.knobs.b;
            if (consumed < target || consumed - (long long)m.knobs.s * m.knobs.b >= target) {
                c5 = false;
            }
            ++rows;
        }
    }
    report(5, c5, fmt("token budget: grad_accum*s*b in [target, target + s*b) on %d logged rounds",
                      rows));
}

// --- criterion 6: dual controller properties ---------------------------------

void criterion_6(const RunOutput& cafl, const RunOutput& fedavg) {
    bool nonneg = true;
    for (const RunOutput* run : {&cafl, &fedavg}) {
        for (const RoundMetrics& m : run->history) {
            nonneg = nonneg && m.duals.lambda_energy >= 0.0 && m.duals.lambda_comm >= 0.0 &&
                     m.duals.lambda_memory >= 0.0 && m.duals.lambda_temp >= 0.0;
        }
    }

    // dead-zone fixed point on a synthetic in-zone usage stream
    bool fixed_point = true;
    {
        const Budgets budgets{1.0, 1.0, 1.0, 1.0};
        DualState duals;
        duals.lambda_energy = 0.3;
        duals.lambda_comm = 1.0;
        duals.lambda_memory = 0.7;
        duals.lambda_temp = 2.5;
        Rng rng(77);
        for (int t = 0; t < 100; ++t) {
            auto in_zone = [&rng]() { return 0.96 + 0.08 * rng.next_double(); };
            const UsageVector usage{in_zone(), in_zone(), in_zone(), in_zone()};
            const DualState next = update_duals(duals, usage, budgets, 0.1, 0.05);
            fixed_point = fixed_point && next.lambda_energy == duals.lambda_energy &&
                          next.lambda_comm == duals.lambda_comm &&
                          next.lambda_memory == duals.lambda_memory &&
                          next.lambda_temp == duals.lambda_temp;
            duals = next;
        }
    }

    // infinite budgets: both modes produce byte-identical traces
    bool equivalent = true;
    {
        std::vector<std::string> base = {
            "budget_energy=inf", "budget_comm_mb=inf", "budget_memory=inf", "budget_temp=inf",
            "rounds=6",          "embed_dim=16",       "hidden_dim=16",     "n_blocks=2",
            "k_base=2",          "s_base=10",          "b_base=8",          "synth_length=20000",
            "max_eval_examples=300"};
        std::vector<std::string> fedavg_over = base;
        fedavg_over.push_back("mode=fedavg");
        std::string rows_a;
        std::string rows_b;
        for (const RoundMetrics& m :
             Federation(config_from_overrides(base)).run_experiment()) {
            rows_a += metrics_csv_row(m) + "\n";
        }
        for (const RoundMetrics& m :
             Federation(config_from_overrides(fedavg_over)).run_experiment()) {
            rows_b += metrics_csv_row(m) + "\n";
        }
        equivalent = !rows_a.empty() && rows_a == rows_b;
    }

    report(6, nonneg && fixed_point && equivalent,
           fmt("dual controller: nonnegativity %s, dead-zone fixed point %s, "
               "infinite-budget equivalence %s",
               nonneg ? "ok" : "violated", fixed_point ? "ok" : "violated",
               equivalent ? "ok" : "violated"));
}

// --- criterion 7: codec bounds -----------------------------------------------

void criterion_7() {
    ModelConfig cfg{17, 12, 12, 3, 4};
    const ModelParams shape = zero_params(cfg);
    Rng rng(4242);

    int tensors_checked = 0;
    bool bounds_ok = true;
    int trial = 0;
    while (tensors_checked < 10000) {
        ++trial;
        const int k = 1 + int(rng.next_index(size_t(cfg.n_blocks)));
        UpdateDelta d;
        d.k = k;
        const double magnitude =
            (trial % 17 == 0) ? 0.0 : std::pow(10.0, -4.0 + 8.0 * rng.next_double());
        for (int i = 0; i < shape.tensor_count(); ++i) {
            Tensor t = shape.tensor(i);
            if (tensor_unfrozen(i, cfg.n_blocks, k)) {
                for (double& v : t.a) v = rng.next_symmetric(magnitude);
            }
            d.tensors.push_back(std::move(t));
        }

        const UpdateDelta q0 = codec_roundtrip(d, 0, cfg);
        const UpdateDelta q1 = codec_roundtrip(d, 1, cfg);
        const UpdateDelta q2 = codec_roundtrip(d, 2, cfg);
        for (int ti = 0; ti < int(d.tensors.size()); ++ti) {
            if (!tensor_unfrozen(ti, cfg.n_blocks, k)) continue;
            const Tensor& t = d.tensors[size_t(ti)];
            double max_abs = 0.0;
            for (double v : t.a) max_abs = std::max(max_abs, std::abs(v));
            for (size_t e = 0; e < t.a.size(); ++e) {
                bounds_ok = bounds_ok && q0.tensors[size_t(ti)].a[e] == double(float(t.a[e]));
                bounds_ok = bounds_ok &&
                            std::abs(q1.tensors[size_t(ti)].a[e] - t.a[e]) <= max_abs / 254.0;
                bounds_ok = bounds_ok &&
                            std::abs(q2.tensors[size_t(ti)].a[e] - t.a[e]) <= max_abs / 3.0;
            }
            ++tensors_checked;
        }
    }

    // encoded sizes track bytes_per_param within 1% header overhead
    bool sizes_ok = true;
    double worst_overhead = 0.0;
    ModelConfig full{64, 64, 64, 4, 8};
    for (int k : {1, 2, 4}) {
        for (int q : {0, 1, 2}) {
            const double proxy = double(active_params(full, k)) * bytes_per_param(q);
            const double overhead =
                std::abs(double(wire_message_bytes(full, k, q)) - proxy) / proxy;
            worst_overhead = std::max(worst_overhead, overhead);
            sizes_ok = sizes_ok && overhead <= 0.01;
        }
    }

    report(7, bounds_ok && sizes_ok,
           fmt("codec: %d tensors within q1<=max/254, q2<=max/3, q0 float32-exact; "
               "size overhead max %.2f%% (<= 1%%)",
               tensors_checked, 100.0 * worst_overhead));
}

// --- criterion 8: determinism ------------------------------------------------

void criterion_8() {
    auto trace = [](int threads) {
        const ExperimentConfig cfg = config_from_overrides(
            {"rounds=10", "max_eval_examples=1000", "threads=" + std::to_string(threads)});
        std::string rows(kMetricsCsvHeader);
        rows += "\n";
        Federation fed(cfg);
        for (int t = 0; t < cfg.rounds; ++t) {
            rows += metrics_csv_row(fed.run_round()) + "\n";
        }
        return rows;
    };
    const std::string a = trace(1);
    const std::string b = trace(1);
    const std::string c = trace(2);
    report(8, a == b && a == c,
           fmt("determinism: 10-round traces byte-identical across reruns (%s) and across "
               "1 vs 2 threads (%s)",
               a == b ? "ok" : "differ", a == c ? "ok" : "differ"));
}

}  // namespace

int main() {
    criterion_1();

    const std::string tmp =
        (std::filesystem::temp_directory_path() / "caflsim_acceptance").string();
    std::filesystem::create_directories(tmp);
    const std::string cafl_csv = tmp + "/cafl.csv";
    const std::string fedavg_csv = tmp + "/fedavg.csv";

    const double t0 = now_seconds();
    const RunOutput cafl = full_run("cafl", cafl_csv);
    const RunOutput fedavg = full_run("fedavg", fedavg_csv);
    const double run_seconds = now_seconds() - t0;

    criteria_2_3_4_5(cafl, fedavg, run_seconds);
    criterion_6(cafl, fedavg);
    criterion_7();
    criterion_8();

    std::printf("%s\n", g_failures == 0 ? "all criteria passed"
                                        : fmt("%d criterion(s) failed", g_failures).c_str());
    return g_failures == 0 ? 0 : 1;
}
