#include "cafl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cafl {

Knobs compute_knobs(const DualState& duals, const PolicyBase& base, int n_blocks) {
    if (base.k_base < 1 || base.s_base < 10 || base.b_base < 8) {
        throw std::invalid_argument("compute_knobs: invalid policy base");
    }
    if (!(base.q_theta1 < base.q_theta2)) {
        throw std::invalid_argument("compute_knobs: q thresholds must increase");
    }

    Knobs knobs;

    const double k_cut = base.alpha_k * (duals.lambda_comm + duals.lambda_memory +
                                         0.5 * duals.lambda_temp);
    knobs.k = std::max(1, base.k_base - int(std::floor(k_cut)));
    knobs.k = std::min(knobs.k, n_blocks);

    const double s_scale = 1.0 - base.beta_s * (duals.lambda_energy + duals.lambda_temp);
    knobs.s = std::max(10, int(std::floor(double(base.s_base) * s_scale)));

    const double b_div = 1.0 + base.gamma_b * (duals.lambda_temp + duals.lambda_memory);
    knobs.b = std::max(8, int(std::floor(double(base.b_base) / b_div)));

    if (duals.lambda_comm < base.q_theta1) {
        knobs.q = 0;
    } else if (duals.lambda_comm < base.q_theta2) {
        knobs.q = 1;
    } else {
        knobs.q = 2;
    }

    knobs.grad_accum = token_budget_accum(knobs.s, knobs.b, base.s_base, base.b_base);
    return knobs;
}

int token_budget_accum(int s, int b, int s_base, int b_base) {
    if (s < 1 || b < 1) {
        throw std::invalid_argument("token_budget_accum: s and b must be >= 1");
    }
    const long long target = (long long)s_base * (long long)b_base;
    const long long per_step = (long long)s * (long long)b;
    const long long accum = (target + per_step - 1) / per_step;
    return int(std::max(1ll, accum));
}

}  // namespace cafl
