#include "cafl/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "cafl/wire.hpp"

namespace cafl {

LocalTrainResult local_train(const ClientShard& shard, const ModelParams& global,
                             const Knobs& knobs, double lr, Rng& rng, const ProxyCoeffs& coeffs,
                             double het_mult) {
    const ModelConfig& mcfg = global.cfg;
    LocalTrainResult result;

    ModelParams local = global;
    ForwardCache cache;
    for (int step = 0; step < knobs.s; ++step) {
        Gradients acc = zero_params(mcfg);
        for (int micro = 0; micro < knobs.grad_accum; ++micro) {
            const Batch batch = sample_batch(shard, knobs.b, mcfg.context_window, rng);
            const double loss = forward_loss(local, batch, cache);
            if (!std::isfinite(loss)) {
                return result;  // diverged; caller drops this client
            }
            const Gradients g = backward(local, cache, knobs.k);
            for (int i = 0; i < acc.tensor_count(); ++i) {
                Tensor& at = acc.tensor(i);
                const Tensor& gt = g.tensor(i);
                for (size_t e = 0; e < at.a.size(); ++e) {
                    at.a[e] += gt.a[e];
                }
            }
        }
        if (knobs.grad_accum > 1) {
            const double inv = 1.0 / double(knobs.grad_accum);
            for (int i = 0; i < acc.tensor_count(); ++i) {
                for (double& v : acc.tensor(i).a) {
                    v *= inv;
                }
            }
        }
        sgd_step(local, acc, lr);
    }

    const UpdateDelta raw = make_delta(local, global, knobs.k);
    result.delta = codec_roundtrip(raw, knobs.q, mcfg, &result.wire_bytes);
    result.usage = estimate_usage(knobs, active_params(mcfg, knobs.k), coeffs);
    result.usage.energy *= het_mult;
    result.usage.temperature *= het_mult;
    result.ok = true;
    return result;
}

UpdateDelta aggregate(const std::vector<UpdateDelta>& deltas, const std::vector<double>* weights) {
    if (deltas.empty()) {
        throw std::invalid_argument("aggregate: empty update list");
    }
    if (weights != nullptr && weights->size() != deltas.size()) {
        throw std::invalid_argument("aggregate: weight count mismatch");
    }
    const size_t n = deltas.size();
    for (const UpdateDelta& d : deltas) {
        if (d.k != deltas[0].k || d.tensors.size() != deltas[0].tensors.size()) {
            throw std::invalid_argument("aggregate: mismatched updates");
        }
    }

    double total = double(n);
    if (weights != nullptr) {
        total = std::accumulate(weights->begin(), weights->end(), 0.0);
        if (!(total > 0.0)) {
            throw std::invalid_argument("aggregate: weights must sum to > 0");
        }
    }

    UpdateDelta out;
    out.k = deltas[0].k;
    out.tensors.reserve(deltas[0].tensors.size());
    for (size_t i = 0; i < deltas[0].tensors.size(); ++i) {
        const Tensor& first = deltas[0].tensors[i];
        Tensor t(first.rows, first.cols);
        for (size_t c = 0; c < n; ++c) {
            const Tensor& src = deltas[c].tensors[i];
            if (!src.same_shape(first)) {
                throw std::invalid_argument("aggregate: tensor shape mismatch");
            }
            const double w = (weights != nullptr) ? (*weights)[c] / total : 1.0 / total;
            for (size_t e = 0; e < t.a.size(); ++e) {
                t.a[e] += w * src.a[e];
            }
        }
        out.tensors.push_back(std::move(t));
    }
    return out;
}

UsageVector average_usage(const std::vector<UsageVector>& usages) {
    if (usages.empty()) {
        throw std::invalid_argument("average_usage: empty list");
    }
    UsageVector sum;
    for (const UsageVector& u : usages) {
        sum.energy += u.energy;
        sum.comm_mb += u.comm_mb;
        sum.memory += u.memory;
        sum.temperature += u.temperature;
    }
    const double inv = 1.0 / double(usages.size());
    sum.energy *= inv;
    sum.comm_mb *= inv;
    sum.memory *= inv;
    sum.temperature *= inv;
    return sum;
}

Federation::Federation(const ExperimentConfig& cfg) : cfg_(cfg), params_{} {
    validate_config(cfg_);

    if (cfg_.corpus == "synthetic") {
        data_ = corpus_from_text(
            synthetic_text(cfg_.synth_seed, cfg_.synth_alphabet, cfg_.synth_period,
                           size_t(cfg_.synth_length), cfg_.synth_noise),
            cfg_.val_fraction);
    } else {
        data_ = load_corpus(cfg_.corpus, cfg_.val_fraction);
    }
    if (data_.val_ids.size() <= size_t(cfg_.context_window)) {
        throw ConfigError("config: validation split shorter than one context window");
    }

    shards_ = partition(data_.train_ids, cfg_.n_clients, cfg_.context_window);

    params_ = init_model(cfg_.model_config(data_.corpus.vocab_size),
                         sub_seed(cfg_.seed, "init"));

    het_mult_.resize(size_t(cfg_.n_clients), 1.0);
    if (cfg_.heterogeneity) {
        for (int c = 0; c < cfg_.n_clients; ++c) {
            Rng r(sub_seed(cfg_.seed, "het/" + std::to_string(c)));
            het_mult_[size_t(c)] = 0.8 + 0.4 * r.next_double();
        }
    }
}

std::vector<int> Federation::select_clients(int round) const {
    Rng rng(sub_seed(cfg_.seed, "select/" + std::to_string(round)));
    std::vector<int> ids(size_t(cfg_.n_clients));
    std::iota(ids.begin(), ids.end(), 0);
    const int m = cfg_.clients_per_round;
    for (int i = 0; i < m; ++i) {
        const size_t j = size_t(i) + rng.next_index(ids.size() - size_t(i));
        std::swap(ids[size_t(i)], ids[j]);
    }
    ids.resize(size_t(m));
    std::sort(ids.begin(), ids.end());
    return ids;
}

Knobs Federation::next_knobs() const {
    if (cfg_.mode == "cafl") {
        return compute_knobs(duals_, cfg_.policy_base(), cfg_.n_blocks);
    }
    // Baseline mode: fixed base knobs, uncompressed.
    Knobs knobs;
    knobs.k = std::min(cfg_.k_base, cfg_.n_blocks);
    knobs.s = cfg_.s_base;
    knobs.b = cfg_.b_base;
    knobs.q = 0;
    knobs.grad_accum = token_budget_accum(knobs.s, knobs.b, cfg_.s_base, cfg_.b_base);
    return knobs;
}

RoundMetrics Federation::run_round() {
    const int t = next_round_++;
    RoundMetrics m;
    m.round = t;

    const EvalResult ev =
        evaluate(params_, data_.val_ids, cfg_.context_window, cfg_.max_eval_examples);
    m.val_loss = ev.loss;
    m.val_acc = ev.accuracy;

    const std::vector<int> selected = select_clients(t);
    const Knobs knobs = next_knobs();
    m.knobs = knobs;

    std::vector<LocalTrainResult> results(selected.size());
    auto run_client = [&](size_t idx) {
        const int cid = selected[idx];
        Rng rng(sub_seed(cfg_.seed,
                         "batch/" + std::to_string(cid) + "/" + std::to_string(t)));
        results[idx] = local_train(shards_[size_t(cid)], params_, knobs, cfg_.lr, rng,
                                   cfg_.proxy_coeffs(), het_mult_[size_t(cid)]);
    };
    if (cfg_.threads <= 1) {
        for (size_t i = 0; i < selected.size(); ++i) {
            run_client(i);
        }
    } else {
        // Clients are independent; results land in distinct slots and are
        // aggregated in id order, so the trace is thread-count invariant.
        std::vector<std::future<void>> futures;
        const int t_count = std::min<int>(cfg_.threads, int(selected.size()));
        for (int tid = 0; tid < t_count; ++tid) {
            futures.push_back(std::async(std::launch::async, [&, tid]() {
                for (size_t i = size_t(tid); i < selected.size(); i += size_t(t_count)) {
                    run_client(i);
                }
            }));
        }
        for (auto& f : futures) {
            f.get();
        }
    }

    std::vector<UpdateDelta> deltas;
    std::vector<UsageVector> usages;
    std::vector<double> weights;
    for (size_t i = 0; i < selected.size(); ++i) {
        if (!results[i].ok) {
            std::fprintf(stderr, "round %d: client %d diverged; excluded from aggregation\n", t,
                         selected[i]);
            continue;
        }
        deltas.push_back(std::move(results[i].delta));
        usages.push_back(results[i].usage);
        weights.push_back(double(shards_[size_t(selected[i])].ids.size()));
        m.wire_bytes += results[i].wire_bytes;
        m.clients.push_back(selected[i]);
    }

    if (deltas.empty()) {
        // Every client failed: freeze model and duals, log the round as skipped.
        std::fprintf(stderr, "round %d: all clients failed; round skipped\n", t);
        m.duals = duals_;
        return m;
    }

    const UpdateDelta agg = aggregate(deltas, cfg_.weighted_agg ? &weights : nullptr);
    apply_delta(params_, agg);

    m.usage = average_usage(usages);
    if (cfg_.mode == "cafl") {
        duals_ = update_duals_opt(duals_, m.usage, cfg_.budgets(), cfg_.dual_options());
    }
    m.duals = duals_;
    m.r_energy = m.usage.energy / cfg_.budget_energy;
    m.r_comm = m.usage.comm_mb / cfg_.budget_comm_mb;
    m.r_memory = m.usage.memory / cfg_.budget_memory;
    m.r_temp = m.usage.temperature / cfg_.budget_temp;
    return m;
}

std::vector<RoundMetrics> Federation::run_experiment() {
    std::vector<RoundMetrics> history;
    history.reserve(size_t(cfg_.rounds));
    for (int t = 0; t < cfg_.rounds; ++t) {
        history.push_back(run_round());
    }
    return history;
}

const char* const kMetricsCsvHeader =
    "round,val_loss,val_acc,k,s,b,q,grad_accum,lambda_E,lambda_C,lambda_M,lambda_T,"
    "u_E,u_C,u_M,u_T,r_E,r_C,r_M,r_T,wire_bytes,clients";

std::string metrics_csv_row(const RoundMetrics& m) {
    std::ostringstream row;
    row << m.round << ',' << format_double(m.val_loss) << ',' << format_double(m.val_acc) << ','
        << m.knobs.k << ',' << m.knobs.s << ',' << m.knobs.b << ',' << m.knobs.q << ','
        << m.knobs.grad_accum << ',' << format_double(m.duals.lambda_energy) << ','
        << format_double(m.duals.lambda_comm) << ',' << format_double(m.duals.lambda_memory) << ','
        << format_double(m.duals.lambda_temp) << ',' << format_double(m.usage.energy) << ','
        << format_double(m.usage.comm_mb) << ',' << format_double(m.usage.memory) << ','
        << format_double(m.usage.temperature) << ',' << format_double(m.r_energy) << ','
        << format_double(m.r_comm) << ',' << format_double(m.r_memory) << ','
        << format_double(m.r_temp) << ',' << m.wire_bytes << ',';
    for (size_t i = 0; i < m.clients.size(); ++i) {
        if (i > 0) row << ';';
        row << m.clients[i];
    }
    return row.str();
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        const size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("metrics csv: cannot open: " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line != kMetricsCsvHeader) {
        throw std::runtime_error("metrics csv: schema mismatch in " + path);
    }
    std::vector<RoundMetrics> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != 22) {
            throw std::runtime_error("metrics csv: malformed row in " + path);
        }
        RoundMetrics m;
        m.round = std::stoi(f[0]);
        m.val_loss = std::stod(f[1]);
        m.val_acc = std::stod(f[2]);
        m.knobs.k = std::stoi(f[3]);
        m.knobs.s = std::stoi(f[4]);
        m.knobs.b = std::stoi(f[5]);
        m.knobs.q = std::stoi(f[6]);
        m.knobs.grad_accum = std::stoi(f[7]);
        m.duals.lambda_energy = std::stod(f[8]);
        m.duals.lambda_comm = std::stod(f[9]);
        m.duals.lambda_memory = std::stod(f[10]);
        m.duals.lambda_temp = std::stod(f[11]);
        m.usage.energy = std::stod(f[12]);
        m.usage.comm_mb = std::stod(f[13]);
        m.usage.memory = std::stod(f[14]);
        m.usage.temperature = std::stod(f[15]);
        m.r_energy = std::stod(f[16]);
        m.r_comm = std::stod(f[17]);
        m.r_memory = std::stod(f[18]);
        m.r_temp = std::stod(f[19]);
        m.wire_bytes = std::stoll(f[20]);
        if (!f[21].empty()) {
            for (const std::string& c : split(f[21], ';')) {
                m.clients.push_back(std::stoi(c));
            }
        }
        rows.push_back(std::move(m));
    }
    return rows;
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<RoundMetrics>& history,
                         int window) {
    const int n = int(history.size());
    const int w = std::min(window, n);

    auto mean_tail = [&](auto getter) {
        double sum = 0.0;
        for (int i = n - w; i < n; ++i) {
            sum += getter(history[size_t(i)]);
        }
        return (w > 0) ? sum / double(w) : 0.0;
    };

    long long total_wire = 0;
    long long tail_wire = 0;
    for (int i = 0; i < n; ++i) {
        total_wire += history[size_t(i)].wire_bytes;
        if (i >= n - w) tail_wire += history[size_t(i)].wire_bytes;
    }

    nlohmann::json j;
    j["mode"] = cfg.mode;
    j["rounds"] = n;
    j["final_window"] = w;
    j["budgets"] = {{"energy", cfg.budget_energy},
                    {"comm_mb", cfg.budget_comm_mb},
                    {"memory", cfg.budget_memory},
                    {"temperature", cfg.budget_temp}};
    j["final_mean_usage"] = {
        {"energy", mean_tail([](const RoundMetrics& m) { return m.usage.energy; })},
        {"comm_mb", mean_tail([](const RoundMetrics& m) { return m.usage.comm_mb; })},
        {"memory", mean_tail([](const RoundMetrics& m) { return m.usage.memory; })},
        {"temperature", mean_tail([](const RoundMetrics& m) { return m.usage.temperature; })}};
    j["final_mean_ratio"] = {
        {"energy", mean_tail([](const RoundMetrics& m) { return m.r_energy; })},
        {"comm", mean_tail([](const RoundMetrics& m) { return m.r_comm; })},
        {"memory", mean_tail([](const RoundMetrics& m) { return m.r_memory; })},
        {"temperature", mean_tail([](const RoundMetrics& m) { return m.r_temp; })}};
    j["final_mean_val_loss"] = mean_tail([](const RoundMetrics& m) { return m.val_loss; });
    j["final_mean_val_acc"] = mean_tail([](const RoundMetrics& m) { return m.val_acc; });
    j["total_wire_bytes"] = total_wire;
    j["final_window_wire_bytes"] = tail_wire;
    return j.dump(2) + "\n";
}

}  // namespace cafl
