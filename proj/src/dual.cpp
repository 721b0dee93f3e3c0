#include "cafl/dual.hpp"

#include <algorithm>
#include <stdexcept>

namespace cafl {

double deadzone(double ratio, double delta) {
    if (delta < 0.0) {
        throw std::invalid_argument("deadzone: delta must be >= 0");
    }
    const double excess = ratio - 1.0;
    return (std::abs(excess) <= delta) ? 0.0 : excess;
}

namespace {

double step_one(double lambda, double usage, double budget, double eta, double delta,
                bool one_sided) {
    double dz = deadzone(usage / budget, delta);
    if (one_sided && dz < 0.0) {
        dz = 0.0;
    }
    return std::max(0.0, lambda + eta * dz);
}

}  // namespace

DualState update_duals_opt(const DualState& duals, const UsageVector& usage,
                           const Budgets& budgets, const DualUpdateOptions& opt) {
    if (!(budgets.energy > 0.0 && budgets.comm_mb > 0.0 && budgets.memory > 0.0 &&
          budgets.temperature > 0.0)) {
        throw std::invalid_argument("update_duals: budgets must be strictly positive");
    }
    if (!(opt.eta_energy > 0.0 && opt.eta_comm > 0.0 && opt.eta_memory > 0.0 &&
          opt.eta_temp > 0.0)) {
        throw std::invalid_argument("update_duals: eta must be > 0");
    }
    DualState next;
    next.lambda_energy = step_one(duals.lambda_energy, usage.energy, budgets.energy,
                                  opt.eta_energy, opt.delta, opt.one_sided);
    next.lambda_comm = step_one(duals.lambda_comm, usage.comm_mb, budgets.comm_mb, opt.eta_comm,
                                opt.delta, opt.one_sided);
    next.lambda_memory = step_one(duals.lambda_memory, usage.memory, budgets.memory,
                                  opt.eta_memory, opt.delta, opt.one_sided);
    next.lambda_temp = step_one(duals.lambda_temp, usage.temperature, budgets.temperature,
                                opt.eta_temp, opt.delta, opt.one_sided);
    return next;
}

DualState update_duals(const DualState& duals, const UsageVector& usage, const Budgets& budgets,
                       double eta, double delta) {
    DualUpdateOptions opt;
    opt.eta_energy = opt.eta_comm = opt.eta_memory = opt.eta_temp = eta;
    opt.delta = delta;
    return update_duals_opt(duals, usage, budgets, opt);
}

}  // namespace cafl
