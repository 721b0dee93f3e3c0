#include "cafl/proxy.hpp"

#include <stdexcept>

namespace cafl {

double bytes_per_param(int q) {
    switch (q) {
        case 0: return 4.0;
        case 1: return 1.0;
        case 2: return 0.25;
        default: throw std::invalid_argument("bytes_per_param: q must be 0, 1 or 2");
    }
}

UsageVector estimate_usage(const Knobs& knobs, long long params_active,
                           const ProxyCoeffs& coeffs) {
    if (params_active < 1) {
        throw std::invalid_argument("estimate_usage: params_active must be >= 1");
    }
    const double n = double(params_active);
    const double s_eff = double(knobs.s) * double(knobs.grad_accum);
    const double b = double(knobs.b);

    UsageVector u;
    u.energy = coeffs.alpha_energy * n * s_eff * b;
    u.comm_mb = coeffs.sparsity * n * bytes_per_param(knobs.q) / double(1 << 20);
    u.memory = coeffs.alpha_memory * (0.2 + coeffs.beta_memory * n * b);
    u.temperature = coeffs.alpha_temp * (0.35 + coeffs.gamma_temp * s_eff + coeffs.delta_temp * b);
    return u;
}

}  // namespace cafl
