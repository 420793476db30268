#include "espace/iofmt.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "tensor format is little-endian; big-endian hosts unsupported");

namespace espace::iofmt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'E', 'S', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("short write: " + tmp.string());
    }
    fs::rename(tmp, path);
}

void append_u32(std::string& buf, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
}

std::uint32_t take_u32(const std::string& buf, std::size_t& off, const fs::path& path) {
    if (off + 4 > buf.size())
        throw FormatError(path.string() + ": truncated at offset " + std::to_string(off) +
                          ", expected 4 more bytes");
    std::uint32_t v;
    std::memcpy(&v, buf.data() + off, 4);
    off += 4;
    return v;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

json load_json(const fs::path& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json_atomic(const fs::path& path, const json& j) {
    write_file_atomic(path, j.dump(2) + "\n");
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& scope) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* key : allowed)
            if (item.key() == key) ok = true;
        if (!ok) throw ConfigError("unknown key '" + scope + item.key() + "'");
    }
}

fs::path sidecar_path(const fs::path& stem) { return fs::path(stem.string() + ".json"); }
fs::path tensor_path(const fs::path& stem) { return fs::path(stem.string() + ".espt"); }

}  // namespace

void write_tensor(const fs::path& path, const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0)
        throw ShapeError("write_tensor: degenerate 0-extent tensor rejected");
    std::string buf;
    buf.reserve(24 + m.size() * sizeof(double));
    buf.append(kMagic, 4);
    append_u32(buf, kVersion);
    append_u32(buf, 0);  // dtype f64
    append_u32(buf, 2);  // ndim
    append_u32(buf, static_cast<std::uint32_t>(m.rows()));
    append_u32(buf, static_cast<std::uint32_t>(m.cols()));
    buf.append(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
    write_file_atomic(path, buf);
}

Matrix read_tensor(const fs::path& path) {
    const std::string buf = slurp(path);
    std::size_t off = 0;
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic at offset 0");
    off = 4;
    const std::uint32_t version = take_u32(buf, off, path);
    if (version != kVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version) +
                          " at offset 4");
    const std::uint32_t dtype = take_u32(buf, off, path);
    if (dtype > 1)
        throw FormatError(path.string() + ": unknown dtype code " + std::to_string(dtype) +
                          " at offset 8");
    const std::uint32_t ndim = take_u32(buf, off, path);
    if (ndim != 2)
        throw FormatError(path.string() + ": expected 2 dims, got " + std::to_string(ndim));
    const std::uint32_t rows = take_u32(buf, off, path);
    const std::uint32_t cols = take_u32(buf, off, path);
    if (rows == 0 || cols == 0)
        throw FormatError(path.string() + ": degenerate 0-extent tensor");
    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    const std::size_t elem = dtype == 0 ? sizeof(double) : sizeof(float);
    if (buf.size() - off != count * elem)
        throw FormatError(path.string() + ": payload length mismatch, expected " +
                          std::to_string(count * elem) + " bytes, found " +
                          std::to_string(buf.size() - off));
    std::vector<double> data(count);
    if (dtype == 0) {
        std::memcpy(data.data(), buf.data() + off, count * sizeof(double));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, buf.data() + off + i * sizeof(float), sizeof(float));
            data[i] = static_cast<double>(f);
        }
    }
    return Matrix(rows, cols, std::move(data));
}

void write_projection(const fs::path& stem, const projector::Projection& p) {
    write_tensor(tensor_path(stem), p.p);
    json side;
    side["layer_id"] = p.layer_id;
    side["kind"] = static_cast<std::uint32_t>(p.kind);
    side["l"] = p.l;
    side["ordering"] = ordering_name(p.ordering);
    write_json_atomic(sidecar_path(stem), side);
}

projector::Projection read_projection(const fs::path& stem) {
    projector::Projection p;
    p.p = read_tensor(tensor_path(stem));
    const json side = load_json(sidecar_path(stem));
    reject_unknown_keys(side, {"layer_id", "kind", "l", "ordering"}, "");
    p.layer_id = side.at("layer_id").get<std::string>();
    p.kind = kind_from_code(side.at("kind").get<std::uint32_t>());
    p.l = side.at("l").get<std::size_t>();
    p.ordering = ordering_from_name(side.at("ordering").get<std::string>());
    if (p.l != p.p.cols())
        throw FormatError(stem.string() + ": sidecar L disagrees with tensor shape");
    return p;
}

void write_correlation(const fs::path& stem, const Matrix& c, CandidateKind kind,
                       std::size_t batches) {
    write_tensor(tensor_path(stem), c);
    json side;
    side["kind"] = static_cast<std::uint32_t>(kind);
    side["k"] = c.rows();
    side["batches"] = batches;
    write_json_atomic(sidecar_path(stem), side);
}

Matrix read_correlation(const fs::path& stem, CandidateKind& kind, std::size_t& batches) {
    Matrix c = read_tensor(tensor_path(stem));
    const json side = load_json(sidecar_path(stem));
    reject_unknown_keys(side, {"kind", "k", "batches"}, "");
    kind = kind_from_code(side.at("kind").get<std::uint32_t>());
    batches = side.at("batches").get<std::size_t>();
    if (side.at("k").get<std::size_t>() != c.rows())
        throw FormatError(stem.string() + ": sidecar K disagrees with tensor shape");
    return c;
}

void write_accumulator(const fs::path& stem, const calib::CorrAccumulator& acc) {
    write_correlation(stem, acc.sum, acc.kind, acc.batch_count);
}

calib::CorrAccumulator read_accumulator(const fs::path& stem) {
    CandidateKind kind;
    std::size_t batches;
    Matrix sum = read_correlation(stem, kind, batches);
    calib::CorrAccumulator acc = calib::make_accumulator(kind, sum.rows());
    acc.sum = std::move(sum);
    acc.batch_count = batches;
    return acc;
}

namespace {

std::size_t get_count(const json& obj, const char* key, std::size_t dflt, std::size_t lo,
                      std::size_t hi, const std::string& scope) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError("key '" + scope + key + "' must be a nonnegative integer");
    const std::size_t n = v.get<std::size_t>();
    if (n < lo || n > hi)
        throw ConfigError("key '" + scope + key + "' out of range [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]: " + std::to_string(n));
    return n;
}

double get_real(const json& obj, const char* key, double dflt, double lo, double hi,
                const std::string& scope) {
    if (!obj.contains(key)) return dflt;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError("key '" + scope + key + "' must be a number");
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi))
        throw ConfigError("key '" + scope + key + "' out of range [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]: " + std::to_string(x));
    return x;
}

}  // namespace

RunConfig load_config(const fs::path& path) {
    const json root = load_json(path);
    if (!root.is_object()) throw ConfigError(path.string() + ": config root must be an object");
    reject_unknown_keys(root,
                        {"seed", "model", "data", "calibration", "pretrain", "rank",
                         "candidates", "ordering", "selection", "healing", "out_dir"},
                        "");
    RunConfig cfg;
    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned())
            throw ConfigError("key 'seed' must be a nonnegative integer");
        cfg.seed = root.at("seed").get<std::uint64_t>();
    }
    if (root.contains("model")) {
        const json& m = root.at("model");
        reject_unknown_keys(m, {"hidden", "blocks", "vocab", "seq_len"}, "model.");
        cfg.model.hidden = get_count(m, "hidden", cfg.model.hidden, 16, 256, "model.");
        cfg.model.blocks = get_count(m, "blocks", cfg.model.blocks, 1, 4, "model.");
        cfg.model.vocab = get_count(m, "vocab", cfg.model.vocab, 2, 4096, "model.");
        cfg.model.seq_len = get_count(m, "seq_len", cfg.model.seq_len, 2, 1024, "model.");
    }
    cfg.model.validate();
    if (root.contains("data")) {
        const json& d = root.at("data");
        reject_unknown_keys(d, {"calib_sequences", "val_sequences", "test_sequences"},
                            "data.");
        cfg.calib_sequences =
            get_count(d, "calib_sequences", cfg.calib_sequences, 1, 100000, "data.");
        cfg.val_sequences = get_count(d, "val_sequences", cfg.val_sequences, 1, 100000, "data.");
        cfg.test_sequences =
            get_count(d, "test_sequences", cfg.test_sequences, 1, 100000, "data.");
    }
    if (root.contains("calibration")) {
        const json& c = root.at("calibration");
        reject_unknown_keys(c, {"batches"}, "calibration.");
        cfg.calib_batches = get_count(c, "batches", cfg.calib_batches, 1, 100000, "calibration.");
    }
    if (cfg.calib_batches > cfg.calib_sequences)
        throw ConfigError("calibration.batches exceeds data.calib_sequences");
    if (root.contains("pretrain")) {
        const json& p = root.at("pretrain");
        reject_unknown_keys(p, {"steps", "lr"}, "pretrain.");
        cfg.pretrain_steps = get_count(p, "steps", cfg.pretrain_steps, 0, 1000000, "pretrain.");
        cfg.pretrain_lr = get_real(p, "lr", cfg.pretrain_lr, 0.0, 10.0, "pretrain.");
    }
    if (root.contains("rank")) {
        const json& r = root.at("rank");
        reject_unknown_keys(r, {"target_rate", "overrides"}, "rank.");
        cfg.target_rate = get_real(r, "target_rate", cfg.target_rate, 0.0, 0.999, "rank.");
        if (r.contains("overrides")) {
            const json& ov = r.at("overrides");
            if (!ov.is_object()) throw ConfigError("rank.overrides must be an object");
            for (const auto& item : ov.items()) {
                if (!item.value().is_number_unsigned() || item.value().get<std::size_t>() == 0)
                    throw ConfigError("rank.overrides." + item.key() +
                                      " must be a positive integer");
                cfg.rank_overrides[item.key()] = item.value().get<std::size_t>();
            }
        }
    }
    if (root.contains("candidates")) {
        const json& cands = root.at("candidates");
        if (!cands.is_array() || cands.empty())
            throw ConfigError("candidates must be a non-empty array of kind names");
        cfg.candidates.clear();
        for (const json& c : cands) {
            if (!c.is_string()) throw ConfigError("candidates entries must be strings");
            cfg.candidates.push_back(kind_from_name(c.get<std::string>()));
        }
    }
    if (root.contains("ordering")) {
        if (!root.at("ordering").is_string())
            throw ConfigError("ordering must be \"algebraic\" or \"absolute\"");
        cfg.ordering = ordering_from_name(root.at("ordering").get<std::string>());
    }
    if (root.contains("selection")) {
        const json& s = root.at("selection");
        reject_unknown_keys(s, {"exclusion_threshold", "include_head"}, "selection.");
        if (s.contains("exclusion_threshold") && !s.at("exclusion_threshold").is_null())
            cfg.exclusion_threshold =
                get_real(s, "exclusion_threshold", 0.02, 1e-9, 1e9, "selection.");
        if (s.contains("include_head")) {
            if (!s.at("include_head").is_boolean())
                throw ConfigError("selection.include_head must be a boolean");
            cfg.include_head = s.at("include_head").get<bool>();
        }
    }
    if (root.contains("healing")) {
        const json& h = root.at("healing");
        reject_unknown_keys(h, {"steps", "lr"}, "healing.");
        cfg.heal_steps = get_count(h, "steps", cfg.heal_steps, 0, 1000000, "healing.");
        cfg.heal_lr = get_real(h, "lr", cfg.heal_lr, 0.0, 10.0, "healing.");
    }
    if (root.contains("out_dir")) {
        if (!root.at("out_dir").is_string()) throw ConfigError("out_dir must be a string");
        cfg.out_dir = root.at("out_dir").get<std::string>();
    }
    if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
    const fs::path parent = cfg.out_dir.has_parent_path() ? cfg.out_dir.parent_path() : ".";
    if (!fs::exists(parent))
        throw ConfigError("out_dir parent does not exist: " + parent.string());
    return cfg;
}

void save_model(const fs::path& dir, const toy::Model& model) {
    fs::create_directories(dir);
    json meta;
    meta["hidden"] = model.config.hidden;
    meta["blocks"] = model.config.blocks;
    meta["vocab"] = model.config.vocab;
    meta["seq_len"] = model.config.seq_len;
    meta["seed"] = model.seed;
    meta["version"] = model.version;
    json layers = json::array();
    for (const auto& layer : model.layers) {
        json jl;
        jl["id"] = layer.spec.id;
        jl["projected"] = layer.projection.has_value();
        jl["folded"] = layer.folded.has_value();
        layers.push_back(jl);
    }
    meta["layers"] = layers;
    write_json_atomic(dir / "model.json", meta);
    write_tensor(dir / "embedding.espt", model.embedding);
    for (const auto& layer : model.layers) {
        write_tensor(dir / (layer.spec.id + ".w.espt"), layer.w);
        if (layer.projection.has_value())
            write_projection(dir / (layer.spec.id + ".proj"), *layer.projection);
        if (layer.folded.has_value())
            write_tensor(dir / (layer.spec.id + ".folded.espt"), *layer.folded);
    }
}

toy::Model load_model(const fs::path& dir) {
    const fs::path meta_path = dir / "model.json";
    if (!fs::exists(meta_path))
        throw DataError("no model checkpoint at " + dir.string());
    const json meta = load_json(meta_path);
    toy::ModelConfig config;
    config.hidden = meta.at("hidden").get<std::size_t>();
    config.blocks = meta.at("blocks").get<std::size_t>();
    config.vocab = meta.at("vocab").get<std::size_t>();
    config.seq_len = meta.at("seq_len").get<std::size_t>();
    toy::Model model = toy::init_model(config, meta.at("seed").get<std::uint64_t>());
    model.version = meta.at("version").get<std::uint64_t>();
    model.embedding = read_tensor(dir / "embedding.espt");
    for (const json& jl : meta.at("layers")) {
        const std::string id = jl.at("id").get<std::string>();
        toy::GemmLayer& layer = model.layer(id);
        layer.w = read_tensor(dir / (id + ".w.espt"));
        if (layer.w.rows() != layer.spec.k || layer.w.cols() != layer.spec.n)
            throw FormatError("checkpoint weight shape mismatch for layer " + id);
        if (jl.at("projected").get<bool>())
            layer.projection = read_projection(dir / (id + ".proj"));
        if (jl.at("folded").get<bool>())
            layer.folded = read_tensor(dir / (id + ".folded.espt"));
    }
    return model;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_sweep_records(const fs::path& path,
                         const std::vector<pipeline::SweepRecord>& records,
                         double baseline_loss) {
    std::string out;
    out += "# baseline_loss " + format_double(baseline_loss) + "\n";
    out += "# layer_id loss_mse loss_nmse loss_go loss_go_norm loss_nl loss_nl_norm "
           "best_kind best_loss rank\n";
    for (const auto& rec : records) {
        out += rec.layer_id;
        // "-" marks a candidate kind that was not built/evaluated.
        for (double loss : rec.losses)
            out += " " + (std::isnan(loss) ? std::string("-") : format_double(loss));
        out += " " + std::string(kind_name(rec.best_kind));
        out += " " + format_double(rec.best_loss);
        out += " " + std::to_string(rec.rank);
        out += "\n";
    }
    write_file_atomic(path, out);
}

std::vector<pipeline::SweepRecord> read_sweep_records(const fs::path& path,
                                                      double& baseline_loss) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# baseline_loss ", 0) != 0)
        throw FormatError(path.string() + ": missing baseline_loss header");
    baseline_loss = std::strtod(line.c_str() + 16, nullptr);
    if (!std::getline(in, line))
        throw FormatError(path.string() + ": missing field header");

    std::vector<pipeline::SweepRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        pipeline::SweepRecord rec;
        rec.baseline_loss = baseline_loss;
        std::string kind;
        std::array<std::string, 6> loss_tok;
        if (!(ss >> rec.layer_id >> loss_tok[0] >> loss_tok[1] >> loss_tok[2] >>
              loss_tok[3] >> loss_tok[4] >> loss_tok[5] >> kind >> rec.best_loss >>
              rec.rank))
            throw FormatError(path.string() + ": malformed record line: " + line);
        for (std::size_t i = 0; i < 6; ++i)
            rec.losses[i] = loss_tok[i] == "-" ? std::numeric_limits<double>::quiet_NaN()
                                               : std::strtod(loss_tok[i].c_str(), nullptr);
        rec.best_kind = kind_from_name(kind);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_compression_report(const fs::path& path,
                              const pipeline::CompressionReport& report) {
    std::string out;
    out += "# layer_id k n l kind params_before params_after rate\n";
    for (const auto& row : report.rows) {
        out += row.layer_id + " " + std::to_string(row.k) + " " + std::to_string(row.n) +
               " " + std::to_string(row.l) + " " +
               (row.l == 0 ? "-" : kind_name(row.kind)) + " " +
               std::to_string(row.params_before) + " " + std::to_string(row.params_after) +
               " " + format_double(row.rate) + "\n";
    }
    out += "# totals params_before " + std::to_string(report.total_before) +
           " params_after " + std::to_string(report.total_after) + " overall_rate " +
           format_double(report.overall_rate) + "\n";
    write_file_atomic(path, out);
}

void write_curve(const fs::path& path, const std::vector<pipeline::CurvePoint>& curve) {
    std::string out;
    out += "# applied layer_id cum_rate val_loss\n";
    for (const auto& pt : curve) {
        out += std::to_string(pt.applied) + " " +
               (pt.layer_id.empty() ? "-" : pt.layer_id) + " " + format_double(pt.cum_rate) +
               " " + format_double(pt.val_loss) + "\n";
    }
    write_file_atomic(path, out);
}

void write_fidelity_report(const fs::path& path,
                           const std::vector<fidelity::FidelityReport>& rows) {
    std::string out;
    out += "# layer_id kind mse nmse go_mse go_bound nl_mse_taylor nl_bound\n";
    for (const auto& r : rows) {
        out += r.layer_id + " " + kind_name(r.kind) + " " + format_double(r.mse) + " " +
               format_double(r.nmse) + " " + format_double(r.go_mse) + " " +
               format_double(r.go_bound) + " " + format_double(r.nl_mse_taylor) + " " +
               format_double(r.nl_bound) + "\n";
    }
    write_file_atomic(path, out);
}

}  // namespace espace::iofmt
