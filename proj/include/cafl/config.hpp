#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafl/dual.hpp"
#include "cafl/model.hpp"
#include "cafl/policy.hpp"
#include "cafl/proxy.hpp"

namespace cafl {

// Invalid configuration; maps to exit code 1 in the CLI.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full experiment configuration. Defaults reproduce the 16-client reference
// setup on the built-in synthetic corpus; proxy coefficients are calibrated
// for the default model size (see README).
struct ExperimentConfig {
    // corpus
    std::string corpus = "synthetic";  // "synthetic" or a text file path
    uint64_t synth_seed = 42;
    int synth_alphabet = 32;
    int synth_period = 96;
    long long synth_length = 160000;
    double synth_noise = 0.1;
    double val_fraction = 0.1;

    // model
    int context_window = 8;
    int embed_dim = 64;
    int hidden_dim = 64;
    int n_blocks = 4;

    // federation
    int n_clients = 16;
    int clients_per_round = 6;
    int rounds = 50;
    double lr = 0.5;
    uint64_t seed = 1;
    std::string mode = "cafl";  // "cafl" or "fedavg"
    int threads = 1;
    bool weighted_agg = false;   // weight client updates by shard size
    bool heterogeneity = true;   // per-client energy/temperature multiplier
    int max_eval_examples = 2000;
    std::string out = "metrics.csv";

    // budgets
    double budget_energy = 1.2;
    double budget_comm_mb = 0.0015;
    double budget_memory = 0.26;
    double budget_temp = 1.0;

    // policy
    int k_base = 4;
    int s_base = 50;
    int b_base = 32;
    double alpha_k = 1.0;
    double beta_s = 0.2;
    double gamma_b = 0.5;
    double q_theta1 = 0.5;
    double q_theta2 = 2.0;

    // dual controller; per-constraint rates of 0 inherit eta
    double eta = 0.3;
    double eta_energy = 0.0;
    double eta_comm = 0.0;
    double eta_memory = 0.0;
    double eta_temp = 0.0;
    double deadzone_delta = 0.05;
    bool dz_one_sided = false;

    // resource proxies
    double alpha_energy = 1.166e-7;
    double alpha_memory = 1.2;
    double beta_memory = 8.7e-8;
    double alpha_temp = 1.0;
    double gamma_temp = 0.002;
    double delta_temp = 0.0053;
    double sparsity = 1.0;

    ModelConfig model_config(int vocab_size) const;
    Budgets budgets() const;
    DualUpdateOptions dual_options() const;
    PolicyBase policy_base() const;
    ProxyCoeffs proxy_coeffs() const;
};

// Key/value text format: one "key = value" per line, '#' comments, unknown
// keys rejected. Overrides are "key=value" strings applied after the file.
ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);
ExperimentConfig config_from_overrides(const std::vector<std::string>& overrides);

void apply_override(ExperimentConfig& cfg, const std::string& key_value);

// Throws ConfigError listing every violated constraint.
void validate_config(const ExperimentConfig& cfg);

// Canonical text form; parsing it back yields an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

// Shortest round-trip decimal form ("0.1", "inf"); shared by config and CSV
// output so identical values always print identically.
std::string format_double(double v);

}  // namespace cafl
