#include "espace/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "espace/fidelity.hpp"
#include "espace/linalg.hpp"

namespace espace::pipeline {

std::vector<std::string> target_layers(const toy::Model& model, bool include_head) {
    std::vector<std::string> out;
    for (const auto& layer : model.layers) {
        if (layer.spec.role == toy::Role::Head && !include_head) continue;
        out.push_back(layer.spec.id);
    }
    return out;
}

std::map<std::string, LayerCalibration> calibrate_all(const toy::Model& model,
                                                      std::span<const toy::Sample> calib,
                                                      std::size_t batches,
                                                      bool include_head) {
    if (batches == 0) throw DataError("calibrate_all: need at least one batch");
    if (calib.size() < batches)
        throw DataError("calibrate_all: requested " + std::to_string(batches) +
                        " batches but calibration shard has " + std::to_string(calib.size()));

    const std::vector<std::string> ids = target_layers(model, include_head);
    std::map<std::string, calib::CorrAccumulator> acc_mse, acc_nmse, acc_nl, acc_nl_norm;
    for (const std::string& id : ids) {
        const std::size_t k = model.layer(id).spec.k;
        acc_mse.emplace(id, calib::make_accumulator(CandidateKind::Mse, k));
        acc_nmse.emplace(id, calib::make_accumulator(CandidateKind::Nmse, k));
        acc_nl.emplace(id, calib::make_accumulator(CandidateKind::Nl, k));
        acc_nl_norm.emplace(id, calib::make_accumulator(CandidateKind::NlNorm, k));
    }

    for (std::size_t b = 0; b < batches; ++b) {
        const toy::ForwardTrace trace = toy::forward(model, calib[b]);
        const toy::GradientTrace grads = toy::backward(model, trace);
        for (const std::string& id : ids) {
            const Matrix& x = trace.inputs.at(id);
            const Matrix& g = grads.d_input.at(id);
            calib::accumulate_mse(acc_mse.at(id), x);
            calib::accumulate_nmse(acc_nmse.at(id), x);
            calib::accumulate_nl(acc_nl.at(id), x, g);
            calib::accumulate_nl(acc_nl_norm.at(id), x, g);
        }
    }

    std::map<std::string, LayerCalibration> out;
    for (const std::string& id : ids) {
        LayerCalibration lc;
        lc.batches = batches;
        const Matrix c_x = calib::finalize(acc_mse.at(id));
        const Matrix c_x_hat = calib::finalize(acc_nmse.at(id));
        const Matrix& w = model.layer(id).w;
        lc.corr[CandidateKind::Mse] = c_x;
        lc.corr[CandidateKind::Nmse] = c_x_hat;
        lc.corr[CandidateKind::Go] = calib::combine_go(c_x, calib::weight_corr(w), false);
        lc.corr[CandidateKind::GoNorm] =
            calib::combine_go(c_x_hat, calib::weight_corr_normalized(w), true);
        lc.corr[CandidateKind::Nl] = calib::finalize(acc_nl.at(id));
        lc.corr[CandidateKind::NlNorm] = calib::finalize(acc_nl_norm.at(id));
        out.emplace(id, std::move(lc));
    }
    return out;
}

std::map<CandidateKind, projector::Projection> build_candidates(
    const LayerCalibration& calibration, const std::string& layer_id, std::size_t l,
    OrderingMode ordering, std::span<const CandidateKind> kinds) {
    std::map<CandidateKind, projector::Projection> out;
    for (CandidateKind kind : kinds) {
        auto it = calibration.corr.find(kind);
        if (it == calibration.corr.end())
            throw DataError("build_candidates: no calibrated matrix for kind " +
                            std::string(kind_name(kind)));
        projector::Projection p = projector::build_projection(it->second, l, ordering);
        p.layer_id = layer_id;
        p.kind = kind;
        out.emplace(kind, std::move(p));
    }
    return out;
}

namespace {

// RAII: attach a projection to one layer, restore on scope exit.
class ScopedAttach {
public:
    ScopedAttach(toy::Model& model, const std::string& layer_id,
                 const projector::Projection& p)
        : layer_(model.layer(layer_id)), saved_(layer_.projection) {
        layer_.projection = p;
    }
    ~ScopedAttach() { layer_.projection = saved_; }

private:
    toy::GemmLayer& layer_;
    std::optional<projector::Projection> saved_;
};

}  // namespace

SweepRecord select_candidate(toy::Model& model, const std::string& layer_id,
                             const std::map<CandidateKind, projector::Projection>& candidates,
                             std::span<const toy::Sample> val, double baseline_loss) {
    if (candidates.empty()) throw DataError("select_candidate: empty candidate set");
    SweepRecord rec;
    rec.layer_id = layer_id;
    rec.baseline_loss = baseline_loss;
    rec.losses.fill(std::numeric_limits<double>::quiet_NaN());

    bool first = true;
    for (const auto& [kind, proj] : candidates) {
        if (proj.layer_id != layer_id)
            throw DataError("select_candidate: candidate tagged for layer " + proj.layer_id);
        ScopedAttach attach(model, layer_id, proj);
        const double loss = toy::evaluate(model, val);
        rec.losses[static_cast<std::size_t>(kind)] = loss;
        // std::map iterates kinds in code order, so strict < is the
        // documented tie-break.
        if (first || loss < rec.best_loss) {
            rec.best_kind = kind;
            rec.best_loss = loss;
            first = false;
        }
    }
    return rec;
}

std::vector<SweepRecord> rank_layers(std::vector<SweepRecord> records) {
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return (records[a].best_loss - records[a].baseline_loss) <
               (records[b].best_loss - records[b].baseline_loss);
    });
    std::vector<SweepRecord> out;
    out.reserve(records.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        SweepRecord rec = records[order[pos]];
        rec.rank = pos;
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<std::string> exclusion_policy(const std::vector<SweepRecord>& records,
                                          double baseline_loss, double threshold) {
    if (threshold <= 0.0) throw DataError("exclusion_policy: threshold must be positive");
    std::vector<std::string> kept;
    for (const SweepRecord& rec : records) {
        const double rel = (rec.best_loss - baseline_loss) / std::fabs(baseline_loss);
        if (rel <= threshold) kept.push_back(rec.layer_id);
    }
    return kept;
}

CompressionReport account(const toy::Model& model,
                          const std::map<std::string, projector::Projection>& selections,
                          bool include_head) {
    CompressionReport report;
    for (const std::string& id : target_layers(model, include_head)) {
        const toy::GemmLayer& layer = model.layer(id);
        CompressionRow row;
        row.layer_id = id;
        row.k = layer.spec.k;
        row.n = layer.spec.n;
        row.params_before = row.k * row.n;
        auto it = selections.find(id);
        if (it != selections.end()) {
            row.l = it->second.l;
            row.kind = it->second.kind;
            row.params_after = row.l * (row.k + row.n);
            row.rate = projector::compression_rate(row.k, row.n, row.l);
        } else {
            row.params_after = row.params_before;
            row.rate = 0.0;
        }
        report.total_before += row.params_before;
        report.total_after += row.params_after;
        report.rows.push_back(std::move(row));
    }
    report.overall_rate = 1.0 - static_cast<double>(report.total_after) /
                                    static_cast<double>(report.total_before);
    return report;
}

CompressionReport compress_model(toy::Model& model,
                                 const std::map<std::string, projector::Projection>& selections,
                                 bool include_head) {
    for (const auto& [id, proj] : selections) {
        toy::GemmLayer& layer = model.layer(id);
        if (proj.p.rows() != layer.spec.k)
            throw ShapeError("compress_model: projection K mismatch for layer " + id);
        layer.projection = proj;
        layer.folded = projector::fold_weights(proj, layer.w);
    }
    return account(model, selections, include_head);
}

std::vector<CurvePoint> progressive_apply(
    const toy::Model& model, const std::vector<SweepRecord>& ranking,
    const std::map<std::string, projector::Projection>& winners, std::size_t k_layers,
    std::span<const toy::Sample> val, bool include_head) {
    if (k_layers > ranking.size())
        throw DataError("progressive_apply: k_layers exceeds ranking size");

    toy::Model work = model;  // private copy; baseline stays untouched
    std::map<std::string, projector::Projection> applied;

    std::vector<CurvePoint> curve;
    CurvePoint base;
    base.applied = 0;
    base.cum_rate = 0.0;
    base.val_loss = toy::evaluate(work, val);
    curve.push_back(base);

    for (std::size_t i = 0; i < k_layers; ++i) {
        const std::string& id = ranking[i].layer_id;
        auto it = winners.find(id);
        if (it == winners.end())
            throw DataError("progressive_apply: no winner projection for layer " + id);
        work.layer(id).projection = it->second;
        applied.emplace(id, it->second);

        CurvePoint pt;
        pt.applied = i + 1;
        pt.layer_id = id;
        pt.cum_rate = account(work, applied, include_head).overall_rate;
        pt.val_loss = toy::evaluate(work, val);
        curve.push_back(std::move(pt));
    }
    return curve;
}

HealResult heal(toy::Model& model, std::span<const toy::Sample> train, std::size_t steps,
                double lr, std::span<const toy::Sample> val) {
    bool any_projection = false;
    for (const auto& layer : model.layers) any_projection |= layer.projection.has_value();
    if (!any_projection)
        throw DataError("heal: model has no attached projections to adapt to");
    if (train.empty()) throw DataError("heal: empty training shard");

    // Snapshot projections to assert the frozen-buffer contract afterwards.
    std::map<std::string, Matrix> frozen;
    for (const auto& layer : model.layers)
        if (layer.projection.has_value()) frozen.emplace(layer.spec.id, layer.projection->p);

    HealResult result;
    double initial_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
        const toy::Sample& batch = train[step % train.size()];
        const toy::ForwardTrace trace = toy::forward(model, batch);
        if (step == 0) initial_loss = trace.loss;
        if (trace.loss > 10.0 * initial_loss)
            throw TrainingError("heal: diverged at step " + std::to_string(step) +
                                ", loss " + std::to_string(trace.loss) + " vs initial " +
                                std::to_string(initial_loss));
        result.train_curve.push_back(trace.loss);
        const toy::GradientTrace grads = toy::backward(model, trace);
        toy::sgd_step(model, grads, lr);
    }

    for (const auto& layer : model.layers) {
        if (!layer.projection.has_value()) continue;
        if (!bitwise_equal(layer.projection->p, frozen.at(layer.spec.id)))
            throw StateError("heal: projection for layer " + layer.spec.id + " changed");
        // Folded caches were invalidated by training; refresh them.
        model.layer(layer.spec.id).folded =
            projector::fold_weights(*layer.projection, layer.w);
    }

    result.final_val_loss = toy::evaluate(model, val);
    return result;
}

double exact_nl_oracle(const toy::Model& model, const std::string& layer_id,
                       const projector::Projection& p, std::span<const toy::Sample> data,
                       double epsilon) {
    if (data.empty()) throw DataError("exact_nl_oracle: no samples");
    const projector::Projection proj = p;  // capture by value for the hook
    toy::PortHooks hooks;
    hooks[layer_id] = [proj, epsilon](const Matrix& x) {
        const Matrix xr = projector::reconstruct(proj, x);
        if (epsilon == 1.0) return xr;
        return x + (xr - x) * epsilon;
    };
    toy::ForwardOptions hooked;
    hooked.hooks = &hooks;

    double total = 0.0;
    for (const toy::Sample& s : data) {
        const double clean = toy::forward(model, s).loss;
        const double perturbed = toy::forward(model, s, hooked).loss;
        const double d = clean - perturbed;
        total += d * d;
    }
    return total / static_cast<double>(data.size());
}

}  // namespace espace::pipeline
