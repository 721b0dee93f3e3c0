#pragma once

namespace cafl {

// Per-constraint budgets. Energy, memory and temperature are in the relative
// units of the resource proxies; communication is in MB.
struct Budgets {
    double energy = 0.0;
    double comm_mb = 0.0;
    double memory = 0.0;
    double temperature = 0.0;
};

// Nonnegative Lagrange multipliers, one per constraint.
struct DualState {
    double lambda_energy = 0.0;
    double lambda_comm = 0.0;
    double lambda_memory = 0.0;
    double lambda_temp = 0.0;
};

// Average per-client usage for one round, same units as Budgets.
struct UsageVector {
    double energy = 0.0;
    double comm_mb = 0.0;
    double memory = 0.0;
    double temperature = 0.0;
};

// Signed dead-zone on a usage ratio: 0 within half-width `delta` of 1,
// otherwise ratio - 1. Negative output lets slack decay the duals through
// the max(0, .) clamp in update_duals.
double deadzone(double ratio, double delta);

// lambda_j <- max(0, lambda_j + eta * dz(u_j / b_j)), independently per constraint.
DualState update_duals(const DualState& duals, const UsageVector& usage, const Budgets& budgets,
                       double eta, double delta);

// Variant with the exposed controller options: a per-constraint learning rate
// and an optional one-sided dz (violations only, no decay under slack).
struct DualUpdateOptions {
    double eta_energy = 0.0;
    double eta_comm = 0.0;
    double eta_memory = 0.0;
    double eta_temp = 0.0;
    double delta = 0.05;
    bool one_sided = false;
};

DualState update_duals_opt(const DualState& duals, const UsageVector& usage,
                           const Budgets& budgets, const DualUpdateOptions& opt);

}  // namespace cafl
