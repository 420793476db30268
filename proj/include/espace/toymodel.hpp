#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "espace/matrix.hpp"
#include "espace/projector.hpp"

namespace espace::toy {

enum class Role { Qkv, Proj, Fc1, Fc2, Head };

const char* role_name(Role r);

struct LayerSpec {
    std::string id;
    Role role;
    std::size_t k = 0;  // input dim; W is K x N, layer computes Y = W^T X
    std::size_t n = 0;  // output dim
    std::size_t block = 0;
};

struct GemmLayer {
    LayerSpec spec;
    Matrix w;
    std::optional<projector::Projection> projection;
    std::optional<Matrix> folded;  // P^T W, invalidated by weight updates
};

struct ModelConfig {
    std::size_t hidden = 32;   // power of two in [16, 256]
    std::size_t blocks = 2;    // 1..4
    std::size_t vocab = 64;
    std::size_t seq_len = 32;

    void validate() const;
};

// Deterministic single-head transformer stack. Embedding is a frozen seeded
// lookup; every GEMM layer (QKV, Proj, FC1, FC2, Head) is trainable and can
// carry a projection.
struct Model {
    ModelConfig config;
    std::uint64_t seed = 0;
    Matrix embedding;               // hidden x vocab, frozen
    std::vector<GemmLayer> layers;  // block-major, head last
    std::uint64_t version = 0;      // bumped on every weight mutation

    GemmLayer& layer(const std::string& id);
    const GemmLayer& layer(const std::string& id) const;
    std::vector<std::string> layer_ids() const;
};

struct Sample {
    std::vector<std::int32_t> tokens;   // length seq_len
    std::vector<std::int32_t> targets;  // length seq_len (next tokens)
};

// Seeded Markov-chain token streams split into disjoint shards: calib is the
// train-side shard (calibration and retraining), val drives selection, test
// is held out for reporting.
struct Dataset {
    std::vector<Sample> calib;
    std::vector<Sample> val;
    std::vector<Sample> test;
};

// Transform applied to a GEMM layer's input port before any attached
// projection. Used by finite-difference checks and the exact NL oracle.
using PortHook = std::function<Matrix(const Matrix&)>;
using PortHooks = std::map<std::string, PortHook>;

struct ForwardOptions {
    bool use_folded = false;      // run (P^T W)^T (P^T X) instead of W^T(PP^T X)
    const PortHooks* hooks = nullptr;
};

struct BlockTrace {
    Matrix q, k, v;    // hidden x M
    Matrix attn;       // M x M, causal, column-stochastic
    Matrix attn_out;   // hidden x M
    Matrix x1;         // residual stream after attention
    Matrix fc1_act;    // tanh(U), 4*hidden x M
    Matrix x2;         // residual stream after MLP
};

struct ForwardTrace {
    std::map<std::string, Matrix> inputs;  // per-layer GEMM input port X
    Matrix x0;                             // embedded tokens, hidden x M
    std::vector<BlockTrace> blocks;
    Matrix logits;  // vocab x M
    Matrix probs;   // vocab x M, softmax columns
    double loss = 0.0;
    std::vector<std::int32_t> tokens;
    std::vector<std::int32_t> targets;
    std::uint64_t model_version = 0;
    bool hooked = false;
    bool used_folded = false;
};

struct GradientTrace {
    std::map<std::string, Matrix> d_input;   // loss gradient at each GEMM input port
    std::map<std::string, Matrix> d_weight;  // loss gradient of each W
};

Model init_model(const ModelConfig& config, std::uint64_t seed);

ForwardTrace forward(const Model& model, const Sample& sample,
                     const ForwardOptions& opts = {});

// Analytic gradients for every weight matrix and every GEMM input port.
// Requires a hook-free, non-folded trace from the current model state.
GradientTrace backward(const Model& model, const ForwardTrace& trace);

// W <- W - lr * dW for every layer. Projections are never touched; folded
// caches are invalidated.
void sgd_step(Model& model, const GradientTrace& grads, double lr);

Dataset synth_task(std::uint64_t seed, std::size_t vocab, std::size_t seq_len,
                   std::size_t n_calib, std::size_t n_val, std::size_t n_test);

// Mean loss over samples (frozen model, read-only).
double evaluate(const Model& model, std::span<const Sample> samples,
                const ForwardOptions& opts = {});

}  // namespace espace::toy
