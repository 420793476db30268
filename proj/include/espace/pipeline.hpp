#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "espace/calib.hpp"
#include "espace/projector.hpp"
#include "espace/toymodel.hpp"

namespace espace::pipeline {

// Six finalized correlation matrices for one layer, keyed by candidate kind.
struct LayerCalibration {
    std::map<CandidateKind, Matrix> corr;
    std::size_t batches = 0;
};

// Per-layer single-candidate sensitivity result.
struct SweepRecord {
    std::string layer_id;
    std::array<double, 6> losses{};  // indexed by CandidateKind code; NaN if not built
    CandidateKind best_kind = CandidateKind::Mse;
    double best_loss = 0.0;
    double baseline_loss = 0.0;
    std::size_t rank = 0;  // filled by rank_layers
};

struct CompressionRow {
    std::string layer_id;
    std::size_t k = 0;
    std::size_t n = 0;
    std::size_t l = 0;  // 0 => layer left uncompressed
    CandidateKind kind = CandidateKind::Mse;
    std::size_t params_before = 0;
    std::size_t params_after = 0;
    double rate = 0.0;
};

struct CompressionReport {
    std::vector<CompressionRow> rows;
    std::size_t total_before = 0;
    std::size_t total_after = 0;
    double overall_rate = 0.0;
};

struct CurvePoint {
    std::size_t applied = 0;      // number of layers compressed so far
    std::string layer_id;         // layer added at this step ("" for baseline)
    double cum_rate = 0.0;        // whole-model compression rate
    double val_loss = 0.0;
};

struct HealResult {
    std::vector<double> train_curve;  // per-step training loss (pre-update)
    double final_val_loss = 0.0;
};

// The GEMM layers the procedure operates on (head excluded unless asked).
std::vector<std::string> target_layers(const toy::Model& model, bool include_head);

// Runs `batches` calibration sequences through the model (forward + backward)
// and produces the six finalized matrices for every target layer.
std::map<std::string, LayerCalibration> calibrate_all(const toy::Model& model,
                                                      std::span<const toy::Sample> calib,
                                                      std::size_t batches,
                                                      bool include_head = false);

// Builds the requested candidates for one layer at rank l.
std::map<CandidateKind, projector::Projection> build_candidates(
    const LayerCalibration& calibration, const std::string& layer_id, std::size_t l,
    OrderingMode ordering, std::span<const CandidateKind> kinds);

// Evaluates each candidate attached to the single layer (all other layers
// uncompressed) on the validation shard and records the argmin. Ties break
// by kind code order.
SweepRecord select_candidate(toy::Model& model, const std::string& layer_id,
                             const std::map<CandidateKind, projector::Projection>& candidates,
                             std::span<const toy::Sample> val, double baseline_loss);

// Ascending by (best_loss - baseline_loss), stable in input order; fills rank.
std::vector<SweepRecord> rank_layers(std::vector<SweepRecord> records);

// Keeps layers whose single-layer relative loss increase is within threshold.
std::vector<std::string> exclusion_policy(const std::vector<SweepRecord>& records,
                                          double baseline_loss, double threshold = 0.02);

// Attaches + folds the selected projections in place and accounts the result.
// Rows cover every target layer; unselected layers keep K*N parameters.
CompressionReport compress_model(toy::Model& model,
                                 const std::map<std::string, projector::Projection>& selections,
                                 bool include_head = false);

// Accounting only (no model mutation): same report for a hypothetical set of
// (layer -> l, kind) selections.
CompressionReport account(const toy::Model& model,
                          const std::map<std::string, projector::Projection>& selections,
                          bool include_head = false);

// Applies ranked winners one at a time, recording out-of-the-box val loss
// after each. Point 0 is the uncompressed baseline.
std::vector<CurvePoint> progressive_apply(
    const toy::Model& model, const std::vector<SweepRecord>& ranking,
    const std::map<std::string, projector::Projection>& winners, std::size_t k_layers,
    std::span<const toy::Sample> val, bool include_head = false);

// SGD healing loop with frozen projections. Aborts via TrainingError if the
// training loss exceeds 10x its initial value.
HealResult heal(toy::Model& model, std::span<const toy::Sample> train, std::size_t steps,
                double lr, std::span<const toy::Sample> val);

// Exact NL-MSE by re-running the full forward with and without the single-
// layer projection, averaged over samples. epsilon < 1 interpolates the
// perturbation x~ <- x + eps*(x~ - x) for Taylor-order checks.
double exact_nl_oracle(const toy::Model& model, const std::string& layer_id,
                       const projector::Projection& p, std::span<const toy::Sample> data,
                       double epsilon = 1.0);

}  // namespace espace::pipeline
