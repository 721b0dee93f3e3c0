#pragma once

#include "cafl/dual.hpp"
#include "cafl/policy.hpp"

namespace cafl {

// Coefficients of the closed-form resource proxies. Defaults (set in the
// experiment config) are calibrated so the plain-FedAvg baseline lands on a
// realistic violation pattern at the default model size.
struct ProxyCoeffs {
    double alpha_energy = 0.0;
    double alpha_memory = 0.0;
    double beta_memory = 0.0;
    double alpha_temp = 0.0;
    double gamma_temp = 0.0;
    double delta_temp = 0.0;
    double sparsity = 1.0;
};

// 4.0, 1.0 or 0.25 bytes for q = 0, 1, 2.
double bytes_per_param(int q);

// Evaluates the four proxies for one client-round. Energy and temperature
// charge effective micro-steps s * grad_accum, so token-budget preservation
// carries its real compute cost. Communication is reported in MB.
UsageVector estimate_usage(const Knobs& knobs, long long params_active,
                           const ProxyCoeffs& coeffs);

}  // namespace cafl
