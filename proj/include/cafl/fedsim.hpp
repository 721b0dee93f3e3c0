#pragma once

#include <string>
#include <vector>

#include "cafl/config.hpp"
#include "cafl/corpus.hpp"
#include "cafl/dual.hpp"
#include "cafl/model.hpp"
#include "cafl/policy.hpp"
#include "cafl/proxy.hpp"
#include "cafl/rng.hpp"

namespace cafl {

// Everything logged for one round. Evaluation happens before training, so
// val_loss/val_acc describe the model entering the round; duals are the state
// after the round's update.
struct RoundMetrics {
    int round = 0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    Knobs knobs;
    DualState duals;
    UsageVector usage;  // average over contributing clients
    double r_energy = 0.0;
    double r_comm = 0.0;
    double r_memory = 0.0;
    double r_temp = 0.0;
    long long wire_bytes = 0;  // total encoded bytes this round
    std::vector<int> clients;  // contributing client ids, ascending
};

struct LocalTrainResult {
    bool ok = false;
    UpdateDelta delta;  // already round-tripped through the wire codec
    UsageVector usage;
    long long wire_bytes = 0;
};

// One client's round: copy the global model, run s optimizer steps of
// grad_accum micro-batches each at freeze depth k, then quantize/dequantize
// the update at level q. A non-finite loss reports failure instead of a delta.
LocalTrainResult local_train(const ClientShard& shard, const ModelParams& global,
                             const Knobs& knobs, double lr, Rng& rng, const ProxyCoeffs& coeffs,
                             double het_mult);

// Elementwise mean of updates (uniform, or weighted when `weights` is given).
// All deltas must share shapes and freeze depth; summation follows list order.
UpdateDelta aggregate(const std::vector<UpdateDelta>& deltas,
                      const std::vector<double>* weights = nullptr);

UsageVector average_usage(const std::vector<UsageVector>& usages);

// Orchestrator: owns the corpus, shards, global model and dual state.
class Federation {
  public:
    explicit Federation(const ExperimentConfig& cfg);

    RoundMetrics run_round();
    std::vector<RoundMetrics> run_experiment();  // cfg.rounds rounds

    const ExperimentConfig& config() const { return cfg_; }
    const SplitCorpus& data() const { return data_; }
    const std::vector<ClientShard>& shards() const { return shards_; }
    const ModelParams& params() const { return params_; }
    const DualState& duals() const { return duals_; }
    int rounds_done() const { return next_round_ - 1; }

    // Knobs the next round would use in the current mode.
    Knobs next_knobs() const;

  private:
    ExperimentConfig cfg_;
    SplitCorpus data_;
    std::vector<ClientShard> shards_;
    std::vector<double> het_mult_;
    ModelParams params_;
    DualState duals_;
    int next_round_ = 1;

    std::vector<int> select_clients(int round) const;
};

// Metrics CSV schema (fixed column order, one row per round).
extern const char* const kMetricsCsvHeader;
std::string metrics_csv_row(const RoundMetrics& m);
std::vector<RoundMetrics> read_metrics_csv(const std::string& path);

// End-of-run summary: budgets plus means over the final `window` rounds.
std::string summary_json(const ExperimentConfig& cfg, const std::vector<RoundMetrics>& history,
                         int window);

}  // namespace cafl
