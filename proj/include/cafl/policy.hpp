#pragma once

#include "cafl/dual.hpp"

namespace cafl {

struct PolicyBase {
    int k_base = 4;
    int s_base = 50;
    int b_base = 32;
    double alpha_k = 1.0;
    double beta_s = 0.2;
    double gamma_b = 0.5;
    double q_theta1 = 0.5;  // lambda_comm thresholds for compression levels
    double q_theta2 = 2.0;
};

// Per-round training knobs: unfrozen layers, local steps, batch size,
// compression level (0 = 32-bit, 1 = 8-bit, 2 = 2-bit), accumulation factor.
struct Knobs {
    int k = 0;
    int s = 0;
    int b = 0;
    int q = 0;
    int grad_accum = 1;
};

// Maps duals to knobs:
//   k = max(1, k_base - floor(alpha_k (lC + lM + 0.5 lT))), clamped to n_blocks
//   s = max(10, floor(s_base (1 - beta_s (lE + lT))))
//   b = max(8, floor(b_base / (1 + gamma_b (lT + lM))))
//   q by thresholds on lambda_comm
// grad_accum is filled via token_budget_accum.
Knobs compute_knobs(const DualState& duals, const PolicyBase& base, int n_blocks);

// max(1, ceil(s_base * b_base / (s * b))): keeps examples consumed per round
// at or just above the baseline budget.
int token_budget_accum(int s, int b, int s_base, int b_base);

}  // namespace cafl
