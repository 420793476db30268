#include "espace/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "espace/linalg.hpp"

namespace espace::toy {

const char* role_name(Role r) {
    switch (r) {
        case Role::Qkv: return "qkv";
        case Role::Proj: return "proj";
        case Role::Fc1: return "fc1";
        case Role::Fc2: return "fc2";
        case Role::Head: return "head";
    }
    return "?";
}

void ModelConfig::validate() const {
    const bool pow2 = hidden != 0 && (hidden & (hidden - 1)) == 0;
    if (!pow2 || hidden < 16 || hidden > 256)
        throw ConfigError("model.hidden must be a power of two in [16, 256], got " +
                          std::to_string(hidden));
    if (blocks < 1 || blocks > 4)
        throw ConfigError("model.blocks must be in [1, 4], got " + std::to_string(blocks));
    if (vocab < 2 || vocab > 4096)
        throw ConfigError("model.vocab must be in [2, 4096], got " + std::to_string(vocab));
    if (seq_len < 2 || seq_len > 1024)
        throw ConfigError("model.seq_len must be in [2, 1024], got " + std::to_string(seq_len));
}

GemmLayer& Model::layer(const std::string& id) {
    for (auto& l : layers)
        if (l.spec.id == id) return l;
    throw DataError("no such layer: " + id);
}

const GemmLayer& Model::layer(const std::string& id) const {
    for (const auto& l : layers)
        if (l.spec.id == id) return l;
    throw DataError("no such layer: " + id);
}

std::vector<std::string> Model::layer_ids() const {
    std::vector<std::string> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.spec.id);
    return out;
}

namespace {

Matrix rows_slice(const Matrix& m, std::size_t r0, std::size_t r1) {
    Matrix out(r1 - r0, m.cols());
    for (std::size_t i = r0; i < r1; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i - r0, j) = m(i, j);
    return out;
}

Matrix vstack3(const Matrix& a, const Matrix& b, const Matrix& c) {
    Matrix out(a.rows() + b.rows() + c.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) out(a.rows() + i, j) = b(i, j);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) out(a.rows() + b.rows() + i, j) = c(i, j);
    return out;
}

// Y = W^T X_port through the layer's configured path, caching the port input.
Matrix layer_output(const GemmLayer& layer, Matrix x_port, const ForwardOptions& opts,
                    ForwardTrace& trace, bool& hooked) {
    if (opts.hooks != nullptr) {
        auto it = opts.hooks->find(layer.spec.id);
        if (it != opts.hooks->end()) {
            x_port = it->second(x_port);
            hooked = true;
        }
    }
    trace.inputs[layer.spec.id] = x_port;
    if (opts.use_folded && layer.folded.has_value()) {
        const Matrix z = projector::project_activations(*layer.projection, x_port);
        return linalg::matmul(transpose(*layer.folded), z);
    }
    if (layer.projection.has_value()) {
        const Matrix xr = projector::reconstruct(*layer.projection, x_port);
        return linalg::matmul(transpose(layer.w), xr);
    }
    return linalg::matmul(transpose(layer.w), x_port);
}

// Gradients of one GEMM layer in the training view Y = W^T (PP^T X).
// Returns the port-input gradient; writes the weight gradient.
Matrix layer_backward(const GemmLayer& layer, const Matrix& x_port, const Matrix& dy,
                      Matrix& dw) {
    if (layer.projection.has_value()) {
        const Matrix xr = projector::reconstruct(*layer.projection, x_port);
        dw = linalg::matmul(xr, transpose(dy));
        const Matrix wdy = linalg::matmul(layer.w, dy);
        return projector::reconstruct(*layer.projection, wdy);
    }
    dw = linalg::matmul(x_port, transpose(dy));
    return linalg::matmul(layer.w, dy);
}

void softmax_columns(Matrix& m) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double mx = m(0, j);
        for (std::size_t i = 1; i < m.rows(); ++i) mx = std::max(mx, m(i, j));
        double sum = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, j) = std::exp(m(i, j) - mx);
            sum += m(i, j);
        }
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) /= sum;
    }
}

}  // namespace

Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model model;
    model.config = config;
    model.seed = seed;
    Rng rng(seed);

    const std::size_t h = config.hidden;
    auto add_layer = [&](const std::string& id, Role role, std::size_t k, std::size_t n,
                         std::size_t block) {
        GemmLayer layer;
        layer.spec = LayerSpec{id, role, k, n, block};
        layer.w = Matrix::random_normal(k, n, rng, 1.0 / std::sqrt(static_cast<double>(k)));
        model.layers.push_back(std::move(layer));
    };
    for (std::size_t b = 0; b < config.blocks; ++b) {
        const std::string prefix = "blk" + std::to_string(b) + ".";
        add_layer(prefix + "qkv", Role::Qkv, h, 3 * h, b);
        add_layer(prefix + "proj", Role::Proj, h, h, b);
        add_layer(prefix + "fc1", Role::Fc1, h, 4 * h, b);
        add_layer(prefix + "fc2", Role::Fc2, 4 * h, h, b);
    }
    add_layer("head", Role::Head, h, config.vocab, config.blocks);
    model.embedding = Matrix::random_normal(h, config.vocab, rng, 1.0);
    return model;
}

ForwardTrace forward(const Model& model, const Sample& sample, const ForwardOptions& opts) {
    const std::size_t m = model.config.seq_len;
    const std::size_t h = model.config.hidden;
    const std::size_t vocab = model.config.vocab;
    if (sample.tokens.size() != m || sample.targets.size() != m)
        throw ShapeError("forward: sample length does not match config seq_len");
    for (std::size_t j = 0; j < m; ++j) {
        if (sample.tokens[j] < 0 || static_cast<std::size_t>(sample.tokens[j]) >= vocab ||
            sample.targets[j] < 0 || static_cast<std::size_t>(sample.targets[j]) >= vocab)
            throw DataError("forward: token id out of vocab range");
    }

    ForwardTrace trace;
    trace.tokens = sample.tokens;
    trace.targets = sample.targets;
    trace.model_version = model.version;
    trace.used_folded = opts.use_folded;

    Matrix x(h, m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < h; ++i) x(i, j) = model.embedding(i, sample.tokens[j]);
    trace.x0 = x;

    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t b = 0; b < model.config.blocks; ++b) {
        const std::string prefix = "blk" + std::to_string(b) + ".";
        BlockTrace bt;

        const Matrix qkv = layer_output(model.layer(prefix + "qkv"), x, opts, trace,
                                        trace.hooked);
        bt.q = rows_slice(qkv, 0, h);
        bt.k = rows_slice(qkv, h, 2 * h);
        bt.v = rows_slice(qkv, 2 * h, 3 * h);

        // Causal scaled dot-product attention, single head. Column j of the
        // score matrix holds position j's attention over positions i <= j.
        Matrix scores = linalg::matmul(transpose(bt.k), bt.q) * inv_sqrt_h;
        bt.attn = Matrix(m, m);
        for (std::size_t j = 0; j < m; ++j) {
            double mx = scores(0, j);
            for (std::size_t i = 1; i <= j; ++i) mx = std::max(mx, scores(i, j));
            double sum = 0.0;
            for (std::size_t i = 0; i <= j; ++i) {
                bt.attn(i, j) = std::exp(scores(i, j) - mx);
                sum += bt.attn(i, j);
            }
            for (std::size_t i = 0; i <= j; ++i) bt.attn(i, j) /= sum;
        }
        bt.attn_out = linalg::matmul(bt.v, bt.attn);

        const Matrix proj_out = layer_output(model.layer(prefix + "proj"), bt.attn_out,
                                             opts, trace, trace.hooked);
        bt.x1 = x + proj_out;

        Matrix u = layer_output(model.layer(prefix + "fc1"), bt.x1, opts, trace,
                                trace.hooked);
        bt.fc1_act = Matrix(u.rows(), u.cols());
        for (std::size_t i = 0; i < u.size(); ++i)
            bt.fc1_act.data()[i] = std::tanh(u.data()[i]);

        const Matrix fc2_out = layer_output(model.layer(prefix + "fc2"), bt.fc1_act, opts,
                                            trace, trace.hooked);
        bt.x2 = bt.x1 + fc2_out;

        x = bt.x2;
        trace.blocks.push_back(std::move(bt));
    }

    trace.logits = layer_output(model.layer("head"), x, opts, trace, trace.hooked);
    trace.probs = trace.logits;
    softmax_columns(trace.probs);

    // Mean next-token cross-entropy via log-sum-exp for stability.
    double loss = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double mx = trace.logits(0, j);
        for (std::size_t i = 1; i < vocab; ++i) mx = std::max(mx, trace.logits(i, j));
        double lse = 0.0;
        for (std::size_t i = 0; i < vocab; ++i) lse += std::exp(trace.logits(i, j) - mx);
        lse = mx + std::log(lse);
        loss += lse - trace.logits(sample.targets[j], j);
    }
    trace.loss = loss / static_cast<double>(m);
    if (!std::isfinite(trace.loss)) throw NumericalError("forward: nonfinite loss");
    return trace;
}

GradientTrace backward(const Model& model, const ForwardTrace& trace) {
    if (trace.model_version != model.version)
        throw StateError("backward: trace is stale, model weights have changed");
    if (trace.hooked)
        throw StateError("backward: trace was computed with port hooks");
    if (trace.used_folded)
        throw StateError("backward: trace was computed on the folded path");

    const std::size_t m = model.config.seq_len;
    const std::size_t h = model.config.hidden;
    const double inv_m = 1.0 / static_cast<double>(m);
    const double inv_sqrt_h = 1.0 / std::sqrt(static_cast<double>(h));

    GradientTrace grads;

    // d loss / d logits = (softmax - onehot) / M
    Matrix dlogits = trace.probs * inv_m;
    for (std::size_t j = 0; j < m; ++j) dlogits(trace.targets[j], j) -= inv_m;

    const GemmLayer& head = model.layer("head");
    Matrix dw_head;
    Matrix dx = layer_backward(head, trace.inputs.at("head"), dlogits, dw_head);
    grads.d_weight["head"] = std::move(dw_head);
    grads.d_input["head"] = dx;

    for (std::size_t bi = model.config.blocks; bi-- > 0;) {
        const std::string prefix = "blk" + std::to_string(bi) + ".";
        const BlockTrace& bt = trace.blocks[bi];

        // x2 = x1 + fc2(tanh(fc1(x1)))
        const GemmLayer& fc2 = model.layer(prefix + "fc2");
        Matrix dw_fc2;
        Matrix dh = layer_backward(fc2, trace.inputs.at(prefix + "fc2"), dx, dw_fc2);
        grads.d_weight[prefix + "fc2"] = std::move(dw_fc2);
        grads.d_input[prefix + "fc2"] = dh;

        Matrix du(dh.rows(), dh.cols());
        for (std::size_t i = 0; i < dh.size(); ++i) {
            const double t = bt.fc1_act.data()[i];
            du.data()[i] = dh.data()[i] * (1.0 - t * t);
        }

        const GemmLayer& fc1 = model.layer(prefix + "fc1");
        Matrix dw_fc1;
        Matrix dx1_mlp = layer_backward(fc1, trace.inputs.at(prefix + "fc1"), du, dw_fc1);
        grads.d_weight[prefix + "fc1"] = std::move(dw_fc1);
        grads.d_input[prefix + "fc1"] = dx1_mlp;

        Matrix dx1 = dx + dx1_mlp;

        // x1 = x0 + proj(attn_out)
        const GemmLayer& proj = model.layer(prefix + "proj");
        Matrix dw_proj;
        Matrix dattn_out = layer_backward(proj, trace.inputs.at(prefix + "proj"), dx1,
                                          dw_proj);
        grads.d_weight[prefix + "proj"] = std::move(dw_proj);
        grads.d_input[prefix + "proj"] = dattn_out;

        // attn_out = V.A
        Matrix dv = linalg::matmul(dattn_out, transpose(bt.attn));
        Matrix da = linalg::matmul(transpose(bt.v), dattn_out);

        // Causal column softmax backward.
        Matrix ds(m, m);
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i <= j; ++i) dot += bt.attn(i, j) * da(i, j);
            for (std::size_t i = 0; i <= j; ++i)
                ds(i, j) = bt.attn(i, j) * (da(i, j) - dot);
        }

        // scores = K^T Q / sqrt(h)
        Matrix dq = linalg::matmul(bt.k, ds) * inv_sqrt_h;
        Matrix dk = linalg::matmul(bt.q, transpose(ds)) * inv_sqrt_h;

        const GemmLayer& qkv = model.layer(prefix + "qkv");
        Matrix dw_qkv;
        const Matrix dqkv = vstack3(dq, dk, dv);
        Matrix dx_attn = layer_backward(qkv, trace.inputs.at(prefix + "qkv"), dqkv, dw_qkv);
        grads.d_weight[prefix + "qkv"] = std::move(dw_qkv);
        grads.d_input[prefix + "qkv"] = dx_attn;

        dx = dx1 + dx_attn;
    }
    return grads;
}

void sgd_step(Model& model, const GradientTrace& grads, double lr) {
    for (const auto& [id, dw] : grads.d_weight) ensure_finite(dw, "sgd_step gradient");
    for (auto& layer : model.layers) {
        auto it = grads.d_weight.find(layer.spec.id);
        if (it == grads.d_weight.end())
            throw TrainingError("sgd_step: missing gradient for layer " + layer.spec.id);
        if (!it->second.same_shape(layer.w))
            throw ShapeError("sgd_step: gradient shape mismatch for " + layer.spec.id);
        for (std::size_t i = 0; i < layer.w.size(); ++i)
            layer.w.data()[i] -= lr * it->second.data()[i];
        layer.folded.reset();
    }
    model.version += 1;
}

Dataset synth_task(std::uint64_t seed, std::size_t vocab, std::size_t seq_len,
                   std::size_t n_calib, std::size_t n_val, std::size_t n_test) {
    if (vocab < 2) throw ConfigError("synth_task: vocab must be >= 2");
    Rng rng(seed);

    // Sharply-peaked Markov transitions so next-token prediction is learnable.
    Matrix transitions(vocab, vocab);
    for (std::size_t i = 0; i < vocab; ++i)
        for (std::size_t j = 0; j < vocab; ++j) transitions(i, j) = 3.0 * rng.normal();
    softmax_columns(transitions);  // column j = distribution of successors of j

    std::set<std::vector<std::int32_t>> seen;
    auto draw_sequence = [&]() {
        std::vector<std::int32_t> seq(seq_len + 1);
        while (true) {
            seq[0] = static_cast<std::int32_t>(rng.uniform_index(vocab));
            for (std::size_t i = 1; i <= seq_len; ++i) {
                const double u = rng.uniform();
                double acc = 0.0;
                std::size_t pick = vocab - 1;
                for (std::size_t t = 0; t < vocab; ++t) {
                    acc += transitions(t, seq[i - 1]);
                    if (u < acc) {
                        pick = t;
                        break;
                    }
                }
                seq[i] = static_cast<std::int32_t>(pick);
            }
            if (seen.insert(seq).second) break;  // shards stay disjoint
        }
        Sample s;
        s.tokens.assign(seq.begin(), seq.end() - 1);
        s.targets.assign(seq.begin() + 1, seq.end());
        return s;
    };

    Dataset ds;
    for (std::size_t i = 0; i < n_calib; ++i) ds.calib.push_back(draw_sequence());
    for (std::size_t i = 0; i < n_val; ++i) ds.val.push_back(draw_sequence());
    for (std::size_t i = 0; i < n_test; ++i) ds.test.push_back(draw_sequence());
    return ds;
}

double evaluate(const Model& model, std::span<const Sample> samples,
                const ForwardOptions& opts) {
    if (samples.empty()) throw DataError("evaluate: no samples");
    double total = 0.0;
    for (const Sample& s : samples) total += forward(model, s, opts).loss;
    return total / static_cast<double>(samples.size());
}

}  // namespace espace::toy
