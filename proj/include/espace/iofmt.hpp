#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "espace/calib.hpp"
#include "espace/fidelity.hpp"
#include "espace/matrix.hpp"
#include "espace/pipeline.hpp"
#include "espace/projector.hpp"
#include "espace/toymodel.hpp"
#include "espace/types.hpp"

namespace espace::iofmt {

// Binary tensor file: magic "ESPT", u32 version (=1), u32 dtype code
// (0 = f64, 1 = f32), u32 ndim, ndim x u32 dims, then the row-major
// little-endian payload. Writes are atomic (temp file + rename) and 64-bit
// payloads round-trip byte-exactly.
void write_tensor(const std::filesystem::path& path, const Matrix& m);
Matrix read_tensor(const std::filesystem::path& path);

// Projection = tensor file + sidecar (layer_id, kind code, L, ordering).
void write_projection(const std::filesystem::path& stem, const projector::Projection& p);
projector::Projection read_projection(const std::filesystem::path& stem);

// Finalized correlation matrix + sidecar (kind code, K, batch count).
void write_correlation(const std::filesystem::path& stem, const Matrix& c,
                       CandidateKind kind, std::size_t batches);
Matrix read_correlation(const std::filesystem::path& stem, CandidateKind& kind,
                        std::size_t& batches);

// Accumulator snapshot (running sum, not yet finalized).
void write_accumulator(const std::filesystem::path& stem, const calib::CorrAccumulator& acc);
calib::CorrAccumulator read_accumulator(const std::filesystem::path& stem);

// Fully validated run configuration. Unknown keys are errors; every field
// has a documented default (see README).
struct RunConfig {
    std::uint64_t seed = 42;
    toy::ModelConfig model;
    std::size_t calib_sequences = 64;
    std::size_t val_sequences = 32;
    std::size_t test_sequences = 32;
    std::size_t calib_batches = 16;
    std::size_t pretrain_steps = 300;
    double pretrain_lr = 0.05;
    double target_rate = 0.5;
    std::map<std::string, std::size_t> rank_overrides;
    std::vector<CandidateKind> candidates{kAllCandidateKinds.begin(),
                                          kAllCandidateKinds.end()};
    OrderingMode ordering = OrderingMode::Algebraic;
    std::optional<double> exclusion_threshold;
    bool include_head = false;
    std::size_t heal_steps = 500;
    double heal_lr = 0.02;
    std::filesystem::path out_dir = "out";
};

RunConfig load_config(const std::filesystem::path& path);

// Model checkpoints: a directory of tensor files plus a config record.
void save_model(const std::filesystem::path& dir, const toy::Model& model);
toy::Model load_model(const std::filesystem::path& dir);

// Line-oriented report files with a one-line field header; floats printed
// with %.17g so identical runs produce identical bytes.
std::string format_double(double v);

void write_sweep_records(const std::filesystem::path& path,
                         const std::vector<pipeline::SweepRecord>& records,
                         double baseline_loss);
std::vector<pipeline::SweepRecord> read_sweep_records(const std::filesystem::path& path,
                                                      double& baseline_loss);

void write_compression_report(const std::filesystem::path& path,
                              const pipeline::CompressionReport& report);

void write_curve(const std::filesystem::path& path,
                 const std::vector<pipeline::CurvePoint>& curve);

void write_fidelity_report(const std::filesystem::path& path,
                           const std::vector<fidelity::FidelityReport>& rows);

}  // namespace espace::iofmt
