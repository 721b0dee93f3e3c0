#include "cafl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <variant>

namespace cafl {

ModelConfig ExperimentConfig::model_config(int vocab_size) const {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = embed_dim;
    m.hidden_dim = hidden_dim;
    m.n_blocks = n_blocks;
    m.context_window = context_window;
    return m;
}

Budgets ExperimentConfig::budgets() const {
    return Budgets{budget_energy, budget_comm_mb, budget_memory, budget_temp};
}

DualUpdateOptions ExperimentConfig::dual_options() const {
    DualUpdateOptions opt;
    opt.eta_energy = eta_energy > 0.0 ? eta_energy : eta;
    opt.eta_comm = eta_comm > 0.0 ? eta_comm : eta;
    opt.eta_memory = eta_memory > 0.0 ? eta_memory : eta;
    opt.eta_temp = eta_temp > 0.0 ? eta_temp : eta;
    opt.delta = deadzone_delta;
    opt.one_sided = dz_one_sided;
    return opt;
}

PolicyBase ExperimentConfig::policy_base() const {
    PolicyBase p;
    p.k_base = k_base;
    p.s_base = s_base;
    p.b_base = b_base;
    p.alpha_k = alpha_k;
    p.beta_s = beta_s;
    p.gamma_b = gamma_b;
    p.q_theta1 = q_theta1;
    p.q_theta2 = q_theta2;
    return p;
}

ProxyCoeffs ExperimentConfig::proxy_coeffs() const {
    ProxyCoeffs c;
    c.alpha_energy = alpha_energy;
    c.alpha_memory = alpha_memory;
    c.beta_memory = beta_memory;
    c.alpha_temp = alpha_temp;
    c.gamma_temp = gamma_temp;
    c.delta_temp = delta_temp;
    c.sparsity = sparsity;
    return c;
}

namespace {

using Field = std::variant<int ExperimentConfig::*, long long ExperimentConfig::*,
                           uint64_t ExperimentConfig::*, double ExperimentConfig::*,
                           bool ExperimentConfig::*, std::string ExperimentConfig::*>;

struct FieldEntry {
    const char* name;
    Field field;
};

// Canonical key order; serialize_config emits keys in this order.
const FieldEntry kFields[] = {
    {"corpus", &ExperimentConfig::corpus},
    {"synth_seed", &ExperimentConfig::synth_seed},
    {"synth_alphabet", &ExperimentConfig::synth_alphabet},
    {"synth_period", &ExperimentConfig::synth_period},
    {"synth_noise", &ExperimentConfig::synth_noise},
    {"synth_length", &ExperimentConfig::synth_length},
    {"val_fraction", &ExperimentConfig::val_fraction},
    {"context_window", &ExperimentConfig::context_window},
    {"embed_dim", &ExperimentConfig::embed_dim},
    {"hidden_dim", &ExperimentConfig::hidden_dim},
    {"n_blocks", &ExperimentConfig::n_blocks},
    {"n_clients", &ExperimentConfig::n_clients},
    {"clients_per_round", &ExperimentConfig::clients_per_round},
    {"rounds", &ExperimentConfig::rounds},
    {"lr", &ExperimentConfig::lr},
    {"seed", &ExperimentConfig::seed},
    {"mode", &ExperimentConfig::mode},
    {"threads", &ExperimentConfig::threads},
    {"weighted_agg", &ExperimentConfig::weighted_agg},
    {"heterogeneity", &ExperimentConfig::heterogeneity},
    {"max_eval_examples", &ExperimentConfig::max_eval_examples},
    {"out", &ExperimentConfig::out},
    {"budget_energy", &ExperimentConfig::budget_energy},
    {"budget_comm_mb", &ExperimentConfig::budget_comm_mb},
    {"budget_memory", &ExperimentConfig::budget_memory},
    {"budget_temp", &ExperimentConfig::budget_temp},
    {"k_base", &ExperimentConfig::k_base},
    {"s_base", &ExperimentConfig::s_base},
    {"b_base", &ExperimentConfig::b_base},
    {"alpha_k", &ExperimentConfig::alpha_k},
    {"beta_s", &ExperimentConfig::beta_s},
    {"gamma_b", &ExperimentConfig::gamma_b},
    {"q_theta1", &ExperimentConfig::q_theta1},
    {"q_theta2", &ExperimentConfig::q_theta2},
    {"eta", &ExperimentConfig::eta},
    {"eta_energy", &ExperimentConfig::eta_energy},
    {"eta_comm", &ExperimentConfig::eta_comm},
    {"eta_memory", &ExperimentConfig::eta_memory},
    {"eta_temp", &ExperimentConfig::eta_temp},
    {"deadzone_delta", &ExperimentConfig::deadzone_delta},
    {"dz_one_sided", &ExperimentConfig::dz_one_sided},
    {"alpha_energy", &ExperimentConfig::alpha_energy},
    {"alpha_memory", &ExperimentConfig::alpha_memory},
    {"beta_memory", &ExperimentConfig::beta_memory},
    {"alpha_temp", &ExperimentConfig::alpha_temp},
    {"gamma_temp", &ExperimentConfig::gamma_temp},
    {"delta_temp", &ExperimentConfig::delta_temp},
    {"sparsity", &ExperimentConfig::sparsity},
};

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
    T out{};
    const char* first = value.data();
    const char* last = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError("config: key '" + key + "': expected integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    if (value == "inf" || value == "+inf") return INFINITY;
    try {
        size_t idx = 0;
        const double v = std::stod(value, &idx);
        if (idx != value.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ConfigError("config: key '" + key + "': expected number, got '" + value + "'");
    }
}

void set_field(ExperimentConfig& cfg, const FieldEntry& entry, const std::string& value) {
    const std::string key = entry.name;
    std::visit(
        [&](auto member) {
            using T = std::remove_cvref_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                cfg.*member = value;
            } else if constexpr (std::is_same_v<T, bool>) {
                if (value == "true") {
                    cfg.*member = true;
                } else if (value == "false") {
                    cfg.*member = false;
                } else {
                    throw ConfigError("config: key '" + key + "': expected true or false, got '" +
                                      value + "'");
                }
            } else if constexpr (std::is_same_v<T, double>) {
                cfg.*member = parse_double(key, value);
            } else {
                cfg.*member = parse_integer<T>(key, value);
            }
        },
        entry.field);
}

std::string get_field(const ExperimentConfig& cfg, const FieldEntry& entry) {
    return std::visit(
        [&](auto member) -> std::string {
            using T = std::remove_cvref_t<decltype(cfg.*member)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return cfg.*member;
            } else if constexpr (std::is_same_v<T, bool>) {
                return (cfg.*member) ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                return format_double(cfg.*member);
            } else {
                return std::to_string(cfg.*member);
            }
        },
        entry.field);
}

const FieldEntry* find_field(const std::string& key) {
    for (const FieldEntry& e : kFields) {
        if (key == e.name) return &e;
    }
    return nullptr;
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const FieldEntry* entry = find_field(key);
    if (entry == nullptr) {
        throw ConfigError("config: unknown key '" + key + "'");
    }
    set_field(cfg, *entry, value);
}

}  // namespace

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void apply_override(ExperimentConfig& cfg, const std::string& key_value) {
    const size_t eq = key_value.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config: override must be key=value, got '" + key_value + "'");
    }
    set_key(cfg, trim(key_value.substr(0, eq)), trim(key_value.substr(eq + 1)));
}

ExperimentConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open file: " + path);
    }
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path + ":" + std::to_string(line_no) +
                              ": expected key = value");
        }
        set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const std::string& o : overrides) {
        apply_override(cfg, o);
    }
    validate_config(cfg);
    return cfg;
}

ExperimentConfig config_from_overrides(const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    for (const std::string& o : overrides) {
        apply_override(cfg, o);
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
    std::vector<std::string> errors;
    auto require = [&errors](bool ok, const std::string& msg) {
        if (!ok) errors.push_back(msg);
    };

    require(cfg.corpus == "synthetic" || std::filesystem::exists(cfg.corpus),
            "corpus: file does not exist: " + cfg.corpus);
    require(cfg.synth_alphabet >= 2 && cfg.synth_alphabet <= 256,
            "synth_alphabet: must be in [2, 256]");
    require(cfg.synth_period >= 1, "synth_period: must be >= 1");
    require(cfg.synth_noise >= 0.0 && cfg.synth_noise < 1.0, "synth_noise: must be in [0, 1)");
    require(cfg.synth_length >= 2, "synth_length: must be >= 2");
    require(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0, "val_fraction: must be in (0, 1)");

    require(cfg.context_window >= 1, "context_window: must be >= 1");
    require(cfg.embed_dim >= 1, "embed_dim: must be >= 1");
    require(cfg.hidden_dim >= 1, "hidden_dim: must be >= 1");
    require(cfg.embed_dim == cfg.hidden_dim,
            "embed_dim, hidden_dim: must be equal (residual blocks act on the pooled embedding)");
    require(cfg.n_blocks >= 1, "n_blocks: must be >= 1");

    require(cfg.n_clients >= 1, "n_clients: must be >= 1");
    require(cfg.clients_per_round >= 1, "clients_per_round: must be >= 1");
    require(cfg.clients_per_round <= cfg.n_clients,
            "clients_per_round, n_clients: clients_per_round (" +
                std::to_string(cfg.clients_per_round) + ") exceeds n_clients (" +
                std::to_string(cfg.n_clients) + ")");
    require(cfg.rounds >= 0, "rounds: must be >= 0");
    require(cfg.lr >= 0.0 && std::isfinite(cfg.lr), "lr: must be finite and >= 0");
    require(cfg.mode == "cafl" || cfg.mode == "fedavg", "mode: must be cafl or fedavg");
    require(cfg.threads >= 1, "threads: must be >= 1");
    require(cfg.max_eval_examples >= 1, "max_eval_examples: must be >= 1");
    require(!cfg.out.empty(), "out: must not be empty");

    require(cfg.budget_energy > 0.0, "budget_energy: must be > 0");
    require(cfg.budget_comm_mb > 0.0, "budget_comm_mb: must be > 0");
    require(cfg.budget_memory > 0.0, "budget_memory: must be > 0");
    require(cfg.budget_temp > 0.0, "budget_temp: must be > 0");

    require(cfg.k_base >= 1, "k_base: must be >= 1");
    require(cfg.s_base >= 10, "s_base: must be >= 10");
    require(cfg.b_base >= 8, "b_base: must be >= 8");
    require(cfg.alpha_k >= 0.0, "alpha_k: must be >= 0");
    require(cfg.beta_s >= 0.0, "beta_s: must be >= 0");
    require(cfg.gamma_b >= 0.0, "gamma_b: must be >= 0");
    require(cfg.q_theta1 < cfg.q_theta2, "q_theta1, q_theta2: thresholds must increase");

    require(cfg.eta > 0.0, "eta: must be > 0");
    require(cfg.eta_energy >= 0.0, "eta_energy: must be >= 0 (0 inherits eta)");
    require(cfg.eta_comm >= 0.0, "eta_comm: must be >= 0 (0 inherits eta)");
    require(cfg.eta_memory >= 0.0, "eta_memory: must be >= 0 (0 inherits eta)");
    require(cfg.eta_temp >= 0.0, "eta_temp: must be >= 0 (0 inherits eta)");
    require(cfg.deadzone_delta >= 0.0, "deadzone_delta: must be >= 0");

    require(cfg.alpha_energy > 0.0, "alpha_energy: must be > 0");
    require(cfg.alpha_memory > 0.0, "alpha_memory: must be > 0");
    require(cfg.beta_memory > 0.0, "beta_memory: must be > 0");
    require(cfg.alpha_temp > 0.0, "alpha_temp: must be > 0");
    require(cfg.gamma_temp > 0.0, "gamma_temp: must be > 0");
    require(cfg.delta_temp > 0.0, "delta_temp: must be > 0");
    require(cfg.sparsity > 0.0 && cfg.sparsity <= 1.0, "sparsity: must be in (0, 1]");

    if (!errors.empty()) {
        std::ostringstream msg;
        msg << "invalid configuration:";
        for (const std::string& e : errors) {
            msg << "\n  " << e;
        }
        throw ConfigError(msg.str());
    }
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const FieldEntry& e : kFields) {
        out << e.name << " = " << get_field(cfg, e) << "\n";
    }
    return out.str();
}

}  // namespace cafl
