#include "cafl/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cafl/rng.hpp"

namespace cafl {

namespace {

// C += A * B, A: (n x m), B: (m x p), C: (n x p)
void add_ab(Tensor& c, const Tensor& a, const Tensor& b) {
    const int n = a.rows, m = a.cols, p = b.cols;
    for (int i = 0; i < n; ++i) {
        const double* arow = &a.a[size_t(i) * size_t(m)];
        double* crow = &c.a[size_t(i) * size_t(p)];
        for (int k = 0; k < m; ++k) {
            const double av = arow[k];
            const double* brow = &b.a[size_t(k) * size_t(p)];
            for (int j = 0; j < p; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// C += A^T * B, A: (n x m), B: (n x p), C: (m x p)
void add_atb(Tensor& c, const Tensor& a, const Tensor& b) {
    const int n = a.rows, m = a.cols, p = b.cols;
    for (int k = 0; k < n; ++k) {
        const double* arow = &a.a[size_t(k) * size_t(m)];
        const double* brow = &b.a[size_t(k) * size_t(p)];
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = &c.a[size_t(i) * size_t(p)];
            for (int j = 0; j < p; ++j) {
                crow[j] += av * brow[j];
            }
        }
    }
}

// C += A * B^T, A: (n x m), B: (p x m), C: (n x p)
void add_abt(Tensor& c, const Tensor& a, const Tensor& b) {
    const int n = a.rows, m = a.cols, p = b.rows;
    for (int i = 0; i < n; ++i) {
        const double* arow = &a.a[size_t(i) * size_t(m)];
        double* crow = &c.a[size_t(i) * size_t(p)];
        for (int k = 0; k < p; ++k) {
            const double* brow = &b.a[size_t(k) * size_t(m)];
            double s = 0.0;
            for (int j = 0; j < m; ++j) {
                s += arow[j] * brow[j];
            }
            crow[k] += s;
        }
    }
}

void add_row_broadcast(Tensor& c, const Tensor& bias) {
    for (int i = 0; i < c.rows; ++i) {
        double* crow = &c.a[size_t(i) * size_t(c.cols)];
        for (int j = 0; j < c.cols; ++j) {
            crow[j] += bias.a[size_t(j)];
        }
    }
}

}  // namespace

void validate_model_config(const ModelConfig& cfg) {
    if (cfg.vocab_size < 1 || cfg.embed_dim < 1 || cfg.hidden_dim < 1 || cfg.n_blocks < 1 ||
        cfg.context_window < 1) {
        throw std::runtime_error("model config: all dimensions must be >= 1");
    }
    // Residual blocks operate on the pooled embedding, so the two widths must agree.
    if (cfg.embed_dim != cfg.hidden_dim) {
        throw std::runtime_error("model config: embed_dim must equal hidden_dim");
    }
}

Tensor& ModelParams::tensor(int i) {
    return const_cast<Tensor&>(static_cast<const ModelParams*>(this)->tensor(i));
}

const Tensor& ModelParams::tensor(int i) const {
    const int l = cfg.n_blocks;
    if (i == 0) return embedding;
    if (i <= 2 * l) {
        const int j = (i - 1) / 2;
        return ((i - 1) % 2 == 0) ? block_w[size_t(j)] : block_b[size_t(j)];
    }
    if (i == 2 * l + 1) return head_w;
    if (i == 2 * l + 2) return head_b;
    throw std::out_of_range("ModelParams::tensor: bad index");
}

bool tensor_unfrozen(int tensor_index, int n_blocks, int k) {
    if (tensor_index == 0) return k == n_blocks;
    if (tensor_index <= 2 * n_blocks) {
        const int j = (tensor_index - 1) / 2;
        return j >= n_blocks - k;
    }
    return true;  // head
}

ModelParams zero_params(const ModelConfig& cfg) {
    validate_model_config(cfg);
    ModelParams p;
    p.cfg = cfg;
    p.embedding = Tensor(cfg.vocab_size, cfg.embed_dim);
    p.block_w.assign(size_t(cfg.n_blocks), Tensor(cfg.hidden_dim, cfg.hidden_dim));
    p.block_b.assign(size_t(cfg.n_blocks), Tensor(1, cfg.hidden_dim));
    p.head_w = Tensor(cfg.hidden_dim, cfg.vocab_size);
    p.head_b = Tensor(1, cfg.vocab_size);
    return p;
}

ModelParams init_model(const ModelConfig& cfg, uint64_t seed) {
    ModelParams p = zero_params(cfg);
    Rng rng(seed);
    auto fill = [&rng](Tensor& t, int fan_in) {
        const double a = std::sqrt(3.0 / double(fan_in));  // uniform with stddev 1/sqrt(fan_in)
        for (double& v : t.a) {
            v = rng.next_symmetric(a);
        }
    };
    fill(p.embedding, cfg.embed_dim);
    for (int j = 0; j < cfg.n_blocks; ++j) {
        fill(p.block_w[size_t(j)], cfg.hidden_dim);
    }
    fill(p.head_w, cfg.hidden_dim);
    return p;
}

double forward_loss(const ModelParams& params, const Batch& batch, ForwardCache& cache) {
    const ModelConfig& cfg = params.cfg;
    const int b = batch.batch_size;
    const int w = batch.context_window;
    const int d = cfg.embed_dim;
    const int l = cfg.n_blocks;
    const int v = cfg.vocab_size;

    for (int id : batch.contexts) {
        if (id < 0 || id >= v) throw std::invalid_argument("forward_loss: context id out of range");
    }
    for (int id : batch.targets) {
        if (id < 0 || id >= v) throw std::invalid_argument("forward_loss: target id out of range");
    }

    cache.batch = batch;
    cache.x.assign(size_t(l) + 1, Tensor(b, d));
    cache.tanh_u.assign(size_t(l), Tensor(b, d));

    // mean-pooled embedding over the context window
    Tensor& x0 = cache.x[0];
    for (int i = 0; i < b; ++i) {
        double* row = &x0.a[size_t(i) * size_t(d)];
        for (int j = 0; j < w; ++j) {
            const int id = batch.contexts[size_t(i) * size_t(w) + size_t(j)];
            const double* emb = &params.embedding.a[size_t(id) * size_t(d)];
            for (int c = 0; c < d; ++c) {
                row[c] += emb[c];
            }
        }
        const double inv_w = 1.0 / double(w);
        for (int c = 0; c < d; ++c) {
            row[c] *= inv_w;
        }
    }

    // residual tanh blocks: x_{l+1} = x_l + tanh(x_l W + b)
    for (int li = 0; li < l; ++li) {
        Tensor& t = cache.tanh_u[size_t(li)];
        add_ab(t, cache.x[size_t(li)], params.block_w[size_t(li)]);
        add_row_broadcast(t, params.block_b[size_t(li)]);
        for (double& e : t.a) {
            e = std::tanh(e);
        }
        Tensor& xn = cache.x[size_t(li) + 1];
        for (size_t e = 0; e < xn.a.size(); ++e) {
            xn.a[e] = cache.x[size_t(li)].a[e] + t.a[e];
        }
    }

    // head + softmax cross-entropy
    Tensor logits(b, v);
    add_ab(logits, cache.x[size_t(l)], params.head_w);
    add_row_broadcast(logits, params.head_b);

    cache.probs = Tensor(b, v);
    double loss_sum = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* z = &logits.a[size_t(i) * size_t(v)];
        double* p = &cache.probs.a[size_t(i) * size_t(v)];
        double m = z[0];
        for (int j = 1; j < v; ++j) {
            m = std::max(m, z[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < v; ++j) {
            sum += std::exp(z[j] - m);
        }
        const double lse = m + std::log(sum);
        for (int j = 0; j < v; ++j) {
            p[j] = std::exp(z[j] - lse);
        }
        loss_sum += lse - z[batch.targets[size_t(i)]];
    }
    cache.loss = loss_sum / double(b);
    return cache.loss;
}

Gradients backward(const ModelParams& params, const ForwardCache& cache, int k) {
    const ModelConfig& cfg = params.cfg;
    const int l = cfg.n_blocks;
    if (k < 1 || k > l) {
        throw std::invalid_argument("backward: k must be in [1, n_blocks]");
    }
    const int b = cache.batch.batch_size;
    const int w = cache.batch.context_window;
    const int d = cfg.embed_dim;
    const int v = cfg.vocab_size;

    Gradients g = zero_params(cfg);

    // d(mean loss)/d(logits) = (probs - onehot) / batch
    Tensor dlogits(b, v);
    for (int i = 0; i < b; ++i) {
        const double* p = &cache.probs.a[size_t(i) * size_t(v)];
        double* dz = &dlogits.a[size_t(i) * size_t(v)];
        const double inv_b = 1.0 / double(b);
        for (int j = 0; j < v; ++j) {
            dz[j] = p[j] * inv_b;
        }
        dz[cache.batch.targets[size_t(i)]] -= inv_b;
    }

    add_atb(g.head_w, cache.x[size_t(l)], dlogits);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < v; ++j) {
            g.head_b.a[size_t(j)] += dlogits(i, j);
        }
    }

    Tensor dx(b, d);
    add_abt(dx, dlogits, params.head_w);

    // Walk blocks top-down. Parameter gradients stop at the freeze boundary;
    // the activation gradient keeps flowing only while something below needs it.
    const int lowest = l - k;
    for (int li = l - 1; li >= lowest; --li) {
        const Tensor& t = cache.tanh_u[size_t(li)];
        Tensor gu(b, d);
        for (size_t e = 0; e < gu.a.size(); ++e) {
            gu.a[e] = dx.a[e] * (1.0 - t.a[e] * t.a[e]);
        }
        add_atb(g.block_w[size_t(li)], cache.x[size_t(li)], gu);
        for (int i = 0; i < b; ++i) {
            for (int j = 0; j < d; ++j) {
                g.block_b[size_t(li)].a[size_t(j)] += gu(i, j);
            }
        }
        const bool need_below = (li > lowest) || (k == l);
        if (need_below) {
            add_abt(dx, gu, params.block_w[size_t(li)]);
        }
    }

    if (k == l) {
        const double inv_w = 1.0 / double(w);
        for (int i = 0; i < b; ++i) {
            const double* drow = &dx.a[size_t(i) * size_t(d)];
            for (int j = 0; j < w; ++j) {
                const int id = cache.batch.contexts[size_t(i) * size_t(w) + size_t(j)];
                double* erow = &g.embedding.a[size_t(id) * size_t(d)];
                for (int c = 0; c < d; ++c) {
                    erow[c] += drow[c] * inv_w;
                }
            }
        }
    }
    return g;
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr) {
    for (int i = 0; i < params.tensor_count(); ++i) {
        Tensor& p = params.tensor(i);
        const Tensor& g = grads.tensor(i);
        if (!p.same_shape(g)) {
            throw std::invalid_argument("sgd_step: gradient shape mismatch");
        }
        for (size_t e = 0; e < p.a.size(); ++e) {
            p.a[e] -= lr * g.a[e];
            if (!std::isfinite(p.a[e])) {
                throw std::runtime_error("sgd_step: non-finite parameter after update");
            }
        }
    }
}

long long active_params(const ModelConfig& cfg, int k) {
    if (k < 1 || k > cfg.n_blocks) {
        throw std::invalid_argument("active_params: k must be in [1, n_blocks]");
    }
    const long long h = cfg.hidden_dim, v = cfg.vocab_size, e = cfg.embed_dim;
    long long n = h * v + v;              // head
    n += (long long)k * (h * h + h);      // top k blocks
    if (k == cfg.n_blocks) {
        n += v * e;                       // embedding trains only at full depth
    }
    return n;
}

EvalResult evaluate(const ModelParams& params, const std::vector<int>& val_ids,
                    int context_window, int max_examples) {
    const int w = context_window;
    if (val_ids.size() <= size_t(w)) {
        throw std::runtime_error("evaluate: validation split shorter than one window");
    }
    const size_t n_pos = std::min(val_ids.size() - size_t(w), size_t(max_examples));

    double loss_sum = 0.0;
    size_t correct = 0;
    const int chunk = 256;
    ForwardCache cache;
    for (size_t start = 0; start < n_pos; start += size_t(chunk)) {
        const int b = int(std::min(size_t(chunk), n_pos - start));
        Batch batch;
        batch.batch_size = b;
        batch.context_window = w;
        batch.contexts.resize(size_t(b) * size_t(w));
        batch.targets.resize(size_t(b));
        for (int i = 0; i < b; ++i) {
            const size_t o = start + size_t(i);
            for (int j = 0; j < w; ++j) {
                batch.contexts[size_t(i) * size_t(w) + size_t(j)] = val_ids[o + size_t(j)];
            }
            batch.targets[size_t(i)] = val_ids[o + size_t(w)];
        }
        forward_loss(params, batch, cache);
        const int v = params.cfg.vocab_size;
        for (int i = 0; i < b; ++i) {
            const double* p = &cache.probs.a[size_t(i) * size_t(v)];
            loss_sum += -std::log(p[batch.targets[size_t(i)]]);
            int best = 0;
            for (int j = 1; j < v; ++j) {
                if (p[j] > p[best]) best = j;  // ties break to the lowest id
            }
            if (best == batch.targets[size_t(i)]) ++correct;
        }
    }
    EvalResult r;
    r.loss = loss_sum / double(n_pos);
    r.accuracy = double(correct) / double(n_pos);
    return r;
}

UpdateDelta make_delta(const ModelParams& after, const ModelParams& before, int k) {
    const int l = before.cfg.n_blocks;
    if (k < 1 || k > l) {
        throw std::invalid_argument("make_delta: k must be in [1, n_blocks]");
    }
    UpdateDelta d;
    d.k = k;
    d.tensors.reserve(size_t(before.tensor_count()));
    for (int i = 0; i < before.tensor_count(); ++i) {
        const Tensor& a = after.tensor(i);
        const Tensor& b = before.tensor(i);
        if (!a.same_shape(b)) {
            throw std::invalid_argument("make_delta: shape mismatch");
        }
        Tensor t(b.rows, b.cols);
        if (tensor_unfrozen(i, l, k)) {
            for (size_t e = 0; e < t.a.size(); ++e) {
                t.a[e] = a.a[e] - b.a[e];
            }
        }
        d.tensors.push_back(std::move(t));
    }
    return d;
}

void apply_delta(ModelParams& params, const UpdateDelta& delta) {
    if (int(delta.tensors.size()) != params.tensor_count()) {
        throw std::invalid_argument("apply_delta: tensor count mismatch");
    }
    for (int i = 0; i < params.tensor_count(); ++i) {
        Tensor& p = params.tensor(i);
        const Tensor& d = delta.tensors[size_t(i)];
        if (!p.same_shape(d)) {
            throw std::invalid_argument("apply_delta: shape mismatch");
        }
        for (size_t e = 0; e < p.a.size(); ++e) {
            p.a[e] += d.a[e];
        }
    }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open for write: " + path);
    }
    char header[256];
    std::snprintf(header, sizeof(header),
                  "{\"vocab_size\":%d,\"embed_dim\":%d,\"hidden_dim\":%d,\"n_blocks\":%d,"
                  "\"context_window\":%d}\n",
                  params.cfg.vocab_size, params.cfg.embed_dim, params.cfg.hidden_dim,
                  params.cfg.n_blocks, params.cfg.context_window);
    out << header;
    for (int i = 0; i < params.tensor_count(); ++i) {
        const Tensor& t = params.tensor(i);
        for (double v : t.a) {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char buf[8];
            for (int byte = 0; byte < 8; ++byte) {
                buf[byte] = static_cast<unsigned char>((bits >> (8 * byte)) & 0xff);
            }
            out.write(reinterpret_cast<const char*>(buf), 8);
        }
    }
    if (!out) {
        throw std::runtime_error("checkpoint: write failed: " + path);
    }
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open: " + path);
    }
    std::string header;
    std::getline(in, header);
    ModelConfig cfg;
    const int n = std::sscanf(header.c_str(),
                              "{\"vocab_size\":%d,\"embed_dim\":%d,\"hidden_dim\":%d,"
                              "\"n_blocks\":%d,\"context_window\":%d}",
                              &cfg.vocab_size, &cfg.embed_dim, &cfg.hidden_dim, &cfg.n_blocks,
                              &cfg.context_window);
    if (n != 5) {
        throw std::runtime_error("checkpoint: bad header: " + path);
    }
    ModelParams params = zero_params(cfg);
    for (int i = 0; i < params.tensor_count(); ++i) {
        Tensor& t = params.tensor(i);
        for (double& v : t.a) {
            unsigned char buf[8];
            in.read(reinterpret_cast<char*>(buf), 8);
            if (!in) {
                throw std::runtime_error("checkpoint: truncated file: " + path);
            }
            uint64_t bits = 0;
            for (int byte = 0; byte < 8; ++byte) {
                bits |= uint64_t(buf[byte]) << (8 * byte);
            }
            std::memcpy(&v, &bits, 8);
        }
    }
    return params;
}

}  // namespace cafl
