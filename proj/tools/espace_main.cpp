// espace: activation-projection compression pipeline for the built-in toy
// transformer, plus a GEMM latency bench.
//
// Stages write their artifacts under <out_dir>/<stage>/ and later stages
// consume them from there; rerunning a stage with identical inputs
// reproduces identical bytes.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "espace/bench.hpp"
#include "espace/iofmt.hpp"
#include "espace/kernels.hpp"
#include "espace/pipeline.hpp"

namespace fs = std::filesystem;
using namespace espace;

namespace {

struct CliOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> ordering;
    std::optional<double> target_rate;
};

iofmt::RunConfig effective_config(const CliOverrides& cli) {
    if (cli.config_path.empty()) throw ConfigError("--config PATH is required");
    iofmt::RunConfig cfg = iofmt::load_config(cli.config_path);
    if (cli.seed) cfg.seed = *cli.seed;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.ordering) cfg.ordering = ordering_from_name(*cli.ordering);
    if (cli.target_rate) {
        if (*cli.target_rate < 0.0 || *cli.target_rate >= 1.0)
            throw ConfigError("--target-rate must be in [0, 1)");
        cfg.target_rate = *cli.target_rate;
    }
    return cfg;
}

struct Prepared {
    toy::Model model;  // pretrained baseline
    toy::Dataset data;
};

// Baseline model and data are regenerated deterministically from the config
// at every stage; only compress/heal outputs carry mutated weights on disk.
Prepared prepare(const iofmt::RunConfig& cfg) {
    Prepared p;
    p.data = toy::synth_task(cfg.seed + 1, cfg.model.vocab, cfg.model.seq_len,
                             cfg.calib_sequences, cfg.val_sequences, cfg.test_sequences);
    p.model = toy::init_model(cfg.model, cfg.seed);
    for (std::size_t step = 0; step < cfg.pretrain_steps; ++step) {
        const toy::Sample& batch = p.data.calib[step % p.data.calib.size()];
        const toy::ForwardTrace trace = toy::forward(p.model, batch);
        const toy::GradientTrace grads = toy::backward(p.model, trace);
        toy::sgd_step(p.model, grads, cfg.pretrain_lr);
    }
    return p;
}

std::size_t rank_for_layer(const iofmt::RunConfig& cfg, const toy::LayerSpec& spec) {
    auto it = cfg.rank_overrides.find(spec.id);
    if (it != cfg.rank_overrides.end()) return it->second;
    return projector::choose_rank(spec.k, spec.n, cfg.target_rate);
}

void require_stage(const fs::path& probe, const std::string& stage) {
    if (!fs::exists(probe))
        throw DataError("missing artifact " + probe.string() + "; run `espace " + stage +
                        "` first");
}

fs::path corr_stem(const iofmt::RunConfig& cfg, const std::string& layer,
                   CandidateKind kind) {
    return cfg.out_dir / "calib" / (layer + "." + kind_name(kind));
}

fs::path proj_stem(const iofmt::RunConfig& cfg, const std::string& layer,
                   CandidateKind kind) {
    return cfg.out_dir / "proj" / (layer + "." + kind_name(kind));
}

int cmd_calibrate(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);
    const auto calibration =
        pipeline::calibrate_all(p.model, p.data.calib, cfg.calib_batches, cfg.include_head);
    fs::create_directories(cfg.out_dir / "calib");
    for (const auto& [layer, lc] : calibration)
        for (const auto& [kind, corr] : lc.corr)
            iofmt::write_correlation(corr_stem(cfg, layer, kind), corr, kind, lc.batches);
    std::cout << "calibrated " << calibration.size() << " layers over " << cfg.calib_batches
              << " batches -> " << (cfg.out_dir / "calib").string() << "\n";
    return 0;
}

int cmd_build(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);
    fs::create_directories(cfg.out_dir / "proj");
    std::size_t built = 0;
    for (const std::string& layer : pipeline::target_layers(p.model, cfg.include_head)) {
        const std::size_t l = rank_for_layer(cfg, p.model.layer(layer).spec);
        for (CandidateKind kind : cfg.candidates) {
            const fs::path stem = corr_stem(cfg, layer, kind);
            require_stage(fs::path(stem.string() + ".espt"), "calibrate");
            CandidateKind stored_kind;
            std::size_t batches;
            const Matrix corr = iofmt::read_correlation(stem, stored_kind, batches);
            if (stored_kind != kind)
                throw FormatError("calibration sidecar kind mismatch for " + stem.string());
            projector::Projection proj = projector::build_projection(corr, l, cfg.ordering);
            proj.layer_id = layer;
            proj.kind = kind;
            iofmt::write_projection(proj_stem(cfg, layer, kind), proj);
            ++built;
        }
    }
    std::cout << "built " << built << " projections -> " << (cfg.out_dir / "proj").string()
              << "\n";
    return 0;
}

std::map<CandidateKind, projector::Projection> load_candidates(const iofmt::RunConfig& cfg,
                                                               const std::string& layer) {
    std::map<CandidateKind, projector::Projection> out;
    for (CandidateKind kind : cfg.candidates) {
        const fs::path stem = proj_stem(cfg, layer, kind);
        require_stage(fs::path(stem.string() + ".espt"), "build");
        out.emplace(kind, iofmt::read_projection(stem));
    }
    return out;
}

int cmd_select(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);
    const double baseline = toy::evaluate(p.model, p.data.val);

    std::vector<pipeline::SweepRecord> records;
    std::vector<fidelity::FidelityReport> fidelity_rows;
    const toy::ForwardTrace probe_fwd = toy::forward(p.model, p.data.calib[0]);
    const toy::GradientTrace probe_bwd = toy::backward(p.model, probe_fwd);

    for (const std::string& layer : pipeline::target_layers(p.model, cfg.include_head)) {
        const auto candidates = load_candidates(cfg, layer);
        records.push_back(
            pipeline::select_candidate(p.model, layer, candidates, p.data.val, baseline));
        for (const auto& [kind, proj] : candidates)
            fidelity_rows.push_back(fidelity::evaluate(layer, p.model.layer(layer).w,
                                                       probe_fwd.inputs.at(layer),
                                                       probe_bwd.d_input.at(layer), proj));
    }
    records = pipeline::rank_layers(std::move(records));

    fs::create_directories(cfg.out_dir / "select");
    iofmt::write_sweep_records(cfg.out_dir / "select" / "sweep.txt", records, baseline);
    iofmt::write_fidelity_report(cfg.out_dir / "select" / "fidelity.txt", fidelity_rows);
    std::cout << "selected candidates for " << records.size() << " layers (baseline val loss "
              << iofmt::format_double(baseline) << ") -> "
              << (cfg.out_dir / "select").string() << "\n";
    return 0;
}

int cmd_sweep(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);
    const fs::path sweep_path = cfg.out_dir / "select" / "sweep.txt";
    require_stage(sweep_path, "select");
    double baseline;
    const auto records = iofmt::read_sweep_records(sweep_path, baseline);

    std::map<std::string, projector::Projection> winners;
    for (const auto& rec : records) {
        const fs::path stem = proj_stem(cfg, rec.layer_id, rec.best_kind);
        require_stage(fs::path(stem.string() + ".espt"), "build");
        winners.emplace(rec.layer_id, iofmt::read_projection(stem));
    }
    const auto curve = pipeline::progressive_apply(p.model, records, winners, records.size(),
                                                   p.data.val, cfg.include_head);
    fs::create_directories(cfg.out_dir / "sweep");
    iofmt::write_curve(cfg.out_dir / "sweep" / "progressive.txt", curve);
    std::cout << "progressive sweep over " << records.size() << " layers -> "
              << (cfg.out_dir / "sweep" / "progressive.txt").string() << "\n";
    return 0;
}

int cmd_compress(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);
    const fs::path sweep_path = cfg.out_dir / "select" / "sweep.txt";
    require_stage(sweep_path, "select");
    double baseline;
    const auto records = iofmt::read_sweep_records(sweep_path, baseline);

    std::vector<std::string> kept;
    if (cfg.exclusion_threshold.has_value())
        kept = pipeline::exclusion_policy(records, baseline, *cfg.exclusion_threshold);
    else
        for (const auto& rec : records) kept.push_back(rec.layer_id);

    std::map<std::string, projector::Projection> selections;
    for (const auto& rec : records) {
        if (std::find(kept.begin(), kept.end(), rec.layer_id) == kept.end()) continue;
        const fs::path stem = proj_stem(cfg, rec.layer_id, rec.best_kind);
        require_stage(fs::path(stem.string() + ".espt"), "build");
        selections.emplace(rec.layer_id, iofmt::read_projection(stem));
    }

    const pipeline::CompressionReport report =
        pipeline::compress_model(p.model, selections, cfg.include_head);
    fs::create_directories(cfg.out_dir / "compress");
    iofmt::write_compression_report(cfg.out_dir / "compress" / "report.txt", report);
    iofmt::save_model(cfg.out_dir / "compress" / "model", p.model);
    std::cout << "compressed " << selections.size() << " of " << report.rows.size()
              << " layers, overall rate " << iofmt::format_double(report.overall_rate)
              << " -> " << (cfg.out_dir / "compress").string() << "\n";
    return 0;
}

int cmd_heal(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    const fs::path ckpt = cfg.out_dir / "compress" / "model";
    require_stage(ckpt / "model.json", "compress");
    toy::Model model = iofmt::load_model(ckpt);
    const toy::Dataset data =
        toy::synth_task(cfg.seed + 1, cfg.model.vocab, cfg.model.seq_len,
                        cfg.calib_sequences, cfg.val_sequences, cfg.test_sequences);

    const double before = toy::evaluate(model, data.val);
    const pipeline::HealResult result =
        pipeline::heal(model, data.calib, cfg.heal_steps, cfg.heal_lr, data.val);

    fs::create_directories(cfg.out_dir / "heal");
    iofmt::save_model(cfg.out_dir / "heal" / "model", model);
    std::string curve = "# step train_loss\n";
    for (std::size_t i = 0; i < result.train_curve.size(); ++i)
        curve += std::to_string(i) + " " + iofmt::format_double(result.train_curve[i]) + "\n";
    {
        std::ofstream out(cfg.out_dir / "heal" / "curve.txt", std::ios::trunc);
        out << curve;
    }
    std::cout << "healed over " << cfg.heal_steps << " steps: val loss "
              << iofmt::format_double(before) << " -> "
              << iofmt::format_double(result.final_val_loss) << "\n";
    return 0;
}

int cmd_eval(const CliOverrides& cli) {
    const iofmt::RunConfig cfg = effective_config(cli);
    Prepared p = prepare(cfg);

    std::string summary;
    const double base = toy::evaluate(p.model, p.data.test);
    summary += "baseline " + iofmt::format_double(base) + "\n";

    toy::ForwardOptions folded;
    folded.use_folded = true;
    const fs::path compressed = cfg.out_dir / "compress" / "model" / "model.json";
    if (fs::exists(compressed)) {
        const toy::Model m = iofmt::load_model(cfg.out_dir / "compress" / "model");
        summary += "compressed " +
                   iofmt::format_double(toy::evaluate(m, p.data.test, folded)) + "\n";
    }
    const fs::path healed = cfg.out_dir / "heal" / "model" / "model.json";
    if (fs::exists(healed)) {
        const toy::Model m = iofmt::load_model(cfg.out_dir / "heal" / "model");
        summary += "healed " + iofmt::format_double(toy::evaluate(m, p.data.test, folded)) +
                   "\n";
    }

    fs::create_directories(cfg.out_dir / "eval");
    {
        std::ofstream out(cfg.out_dir / "eval" / "summary.txt", std::ios::trunc);
        out << summary;
    }
    std::cout << summary;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ESPACE: activation-projection GEMM compression, desk scale"};
    app.require_subcommand(1);

    CliOverrides cli;
    app.add_option("--config", cli.config_path, "run configuration (JSON)");
    app.add_option("--seed", cli.seed, "override config seed");
    app.add_option("--out", cli.out_dir, "override config out_dir");
    app.add_option("--ordering", cli.ordering, "eigenvalue ordering: algebraic|absolute");
    app.add_option("--target-rate", cli.target_rate, "rank policy target compression rate");

    auto* calibrate = app.add_subcommand("calibrate", "estimate correlation matrices");
    auto* build = app.add_subcommand("build", "build projection candidates");
    auto* select = app.add_subcommand("select", "pick best candidate per layer");
    auto* sweep = app.add_subcommand("sweep", "progressive application curve");
    auto* compress = app.add_subcommand("compress", "fold weights and account compression");
    auto* heal = app.add_subcommand("heal", "retrain compressed model, projections frozen");
    auto* eval = app.add_subcommand("eval", "report test-shard losses");

    auto* bench_cmd = app.add_subcommand("bench-gemm", "time W^T X vs (P^T W)^T (P^T X)");
    bench::BenchConfig bench_cfg;
    bench_cmd->add_option("--k", bench_cfg.k, "K (reduction dim)")->required();
    bench_cmd->add_option("--n", bench_cfg.n, "N (output dim)")->required();
    bench_cmd->add_option("--m", bench_cfg.m, "M (stack dim)")->required();
    bench_cmd->add_option("--l", bench_cfg.l, "L (retained components)")->required();
    bench_cmd->add_option("--reps", bench_cfg.reps, "timed repetitions (>=10)");
    bench_cmd->add_option("--warmup", bench_cfg.warmup, "warmup repetitions, excluded");
    std::string dtype = "f64";
    bench_cmd->add_option("--dtype", dtype, "f64|f32");
    bench_cmd->add_option("--threads", bench_cfg.threads, "row-parallel matmul threads");

    try {
        app.parse(argc, argv);

        if (bench_cmd->parsed()) {
            if (dtype != "f64" && dtype != "f32")
                throw ConfigError("--dtype must be f64 or f32");
            bench_cfg.f32 = dtype == "f32";
            if (cli.seed) bench_cfg.seed = *cli.seed;
            std::cout << "kernel variant: " << kernels::isa_name(kernels::active().isa)
                      << ", threads " << bench_cfg.threads << "\n";
            std::cout << bench::describe(bench::bench_gemm(bench_cfg));
            return 0;
        }
        if (calibrate->parsed()) return cmd_calibrate(cli);
        if (build->parsed()) return cmd_build(cli);
        if (select->parsed()) return cmd_select(cli);
        if (sweep->parsed()) return cmd_sweep(cli);
        if (compress->parsed()) return cmd_compress(cli);
        if (heal->parsed()) return cmd_heal(cli);
        if (eval->parsed()) return cmd_eval(cli);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
