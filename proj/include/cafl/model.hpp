#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cafl/corpus.hpp"

namespace cafl {

struct ModelConfig {
    int vocab_size = 0;
    int embed_dim = 64;
    int hidden_dim = 64;
    int n_blocks = 4;
    int context_window = 8;
};

// Dense row-major tensor; biases are 1 x n.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c), 0.0) {}

    double& operator()(int r, int c) { return a[size_t(r) * size_t(cols) + size_t(c)]; }
    double operator()(int r, int c) const { return a[size_t(r) * size_t(cols) + size_t(c)]; }
    size_t count() const { return a.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// Next-character model: mean-pooled embedding, n_blocks residual tanh blocks,
// linear head. Canonical tensor order (used by init, deltas, the wire codec
// and checkpoints): embedding, block0 w, block0 b, ..., head w, head b.
struct ModelParams {
    ModelConfig cfg;
    Tensor embedding;             // vocab x embed
    std::vector<Tensor> block_w;  // n_blocks of hidden x hidden
    std::vector<Tensor> block_b;  // n_blocks of 1 x hidden
    Tensor head_w;                // hidden x vocab
    Tensor head_b;                // 1 x vocab

    int tensor_count() const { return 2 * cfg.n_blocks + 3; }
    Tensor& tensor(int i);
    const Tensor& tensor(int i) const;
};

// Gradients share the parameter layout; frozen tensors hold exact zeros.
using Gradients = ModelParams;

// Difference of two parameter sets restricted to the unfrozen region; frozen
// tensors are explicit zeros. k is the freeze depth the delta was made with.
struct UpdateDelta {
    int k = 0;
    std::vector<Tensor> tensors;  // canonical order, all tensors
};

struct ForwardCache {
    Batch batch;
    std::vector<Tensor> x;     // n_blocks + 1 activations; x[0] is the pooled embedding
    std::vector<Tensor> tanh_u;  // n_blocks tanh(u) values
    Tensor probs;              // batch x vocab
    double loss = 0.0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

void validate_model_config(const ModelConfig& cfg);

// True when canonical tensor i is trainable at freeze depth k. The head is
// always trainable, block j iff j >= n_blocks - k, the embedding iff k == n_blocks.
bool tensor_unfrozen(int tensor_index, int n_blocks, int k);

ModelParams zero_params(const ModelConfig& cfg);
ModelParams init_model(const ModelConfig& cfg, uint64_t seed);

double forward_loss(const ModelParams& params, const Batch& batch, ForwardCache& cache);
Gradients backward(const ModelParams& params, const ForwardCache& cache, int k);
void sgd_step(ModelParams& params, const Gradients& grads, double lr);

long long active_params(const ModelConfig& cfg, int k);

EvalResult evaluate(const ModelParams& params, const std::vector<int>& val_ids,
                    int context_window, int max_examples);

UpdateDelta make_delta(const ModelParams& after, const ModelParams& before, int k);
void apply_delta(ModelParams& params, const UpdateDelta& delta);

// Checkpoint: one JSON header line followed by raw little-endian float64
// tensors in canonical order. Field order is documented in the README.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace cafl
