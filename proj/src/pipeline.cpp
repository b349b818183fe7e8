#include "collo/pipeline.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "collo/dataset.hpp"
#include "collo/decoding.hpp"
#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

namespace fs = std::filesystem;

// ---- config -----------------------------------------------------------------

std::string_view to_string(AttributeList list) { return list == AttributeList::unary ? "unary" : "comparative"; }

AttributeList parse_attribute_list(std::string_view text) {
    if (text == "unary") return AttributeList::unary;
    if (text == "comparative") return AttributeList::comparative;
    fail(ErrorCode::ConfigParseError, "unknown attribute list '" + std::string(text) + "'");
}

fs::path RunConfig::manifest_path() const {
    return manifest.empty() ? output_dir / "data" / "manifest.csv" : manifest;
}

void RunConfig::validate(bool need_manifest) const {
    if (segments < 2) fail(ErrorCode::ConfigParseError, "segments must be >= 2");
    if (views.empty()) fail(ErrorCode::EmptyViewList, "no views configured");
    if (folds < 2) fail(ErrorCode::ConfigParseError, "folds must be >= 2");
    if (t_max == 0 || h_max == 0) fail(ErrorCode::ConfigParseError, "t_max and h_max must be >= 1");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        fail(ErrorCode::ConfigParseError, "holdout fraction must lie in (0, 1)");
    if (synth_count == 0) fail(ErrorCode::ConfigParseError, "synth count must be >= 1");
    if (cag_period && !(*cag_period > 0.0)) fail(ErrorCode::ConfigParseError, "cag period must be positive");
    if (output_dir.empty()) fail(ErrorCode::ConfigParseError, "output directory is empty");
    ModelConfig probe = model;
    probe.input_size = segments;
    probe.input_channels = views.size();
    try {
        probe.validate();
        synth.validate();
    } catch (const Error& e) {
        fail(ErrorCode::ConfigParseError, e.message());
    }
    if (need_manifest && !fs::exists(manifest_path()))
        fail(ErrorCode::IoError, manifest_path().string() + ": manifest not found");
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& values) {
    std::string out;
    for (auto v : values) out += (out.empty() ? "" : ",") + std::to_string(v);
    return out;
}

}  // namespace

std::string RunConfig::to_ini() const {
    std::ostringstream o;
    auto d = [](double v) { return format_double(v); };
    o << "[data]\n"
      << "manifest = " << manifest.string() << '\n'
      << "segments = " << segments << '\n'
      << "views = " << to_string(views) << "\n\n"
      << "[model]\n"
      << "widths = " << join_sizes(model.widths) << '\n'
      << "kernel = " << model.kernel << '\n'
      << "pool = " << model.pool << '\n'
      << "input_shift = " << d(model.input_shift) << '\n'
      << "use_cag = " << (model.use_cag ? "true" : "false") << '\n'
      << "learning_rate = " << d(model.learning_rate) << '\n'
      << "momentum = " << d(model.momentum) << '\n'
      << "epochs = " << model.epochs << '\n'
      << "batch_size = " << model.batch_size << "\n\n"
      << "[cag]\n"
      << "alpha = " << d(model.cag_init.alpha) << '\n'
      << "beta = " << d(model.cag_init.beta) << '\n'
      << "gamma = " << d(model.cag_init.gamma) << '\n'
      << "period = " << (cag_period ? d(*cag_period) : std::string("auto")) << "\n\n"
      << "[cv]\n"
      << "folds = " << folds << '\n'
      << "seed = " << seed << "\n\n"
      << "[evidence]\n"
      << "t_max = " << t_max << '\n'
      << "h_max = " << h_max << '\n'
      << "evaluator = " << to_string(evaluator) << '\n'
      << "learner = " << to_string(learner) << '\n'
      << "list = " << to_string(attribute_list) << '\n'
      << "holdout = " << d(holdout_fraction) << '\n'
      << "forest_rounds = " << forest.rounds << '\n'
      << "forest_learning_rate = " << d(forest.learning_rate) << "\n\n"
      << "[output]\n"
      << "dir = " << output_dir.string() << "\n\n"
      << "[synth]\n"
      << "count = " << synth_count << '\n'
      << "sample_rate = " << d(synth.sample_rate) << '\n'
      << "duration_s = " << d(synth.duration_s) << '\n'
      << "rr_interval_s = " << d(synth.rr_interval_s) << '\n'
      << "class_effect = " << d(synth.class_effect) << '\n'
      << "noise_std = " << d(synth.noise_std) << '\n'
      << "rr_jitter = " << d(synth.rr_jitter) << '\n'
      << "beat_jitter = " << d(synth.beat_jitter) << '\n';
    return o.str();
}

RunConfig RunConfig::from_ini(std::string_view text, const fs::path& base_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream in{std::string(text)};
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorCode::ConfigParseError, "line " + std::to_string(e.line()) + ": " + e.message());
    }
    static const std::map<std::string, std::vector<std::string>> known{
        {"data", {"manifest", "segments", "views"}},
        {"model", {"widths", "kernel", "pool", "input_shift", "use_cag", "learning_rate", "momentum", "epochs", "batch_size"}},
        {"cag", {"alpha", "beta", "gamma", "period"}},
        {"cv", {"folds", "seed"}},
        {"evidence",
         {"t_max", "h_max", "evaluator", "learner", "list", "holdout", "forest_rounds", "forest_learning_rate"}},
        {"output", {"dir"}},
        {"synth",
         {"count", "sample_rate", "duration_s", "rr_interval_s", "class_effect", "noise_std", "rr_jitter",
          "beat_jitter"}},
    };
    for (const auto& [section, body] : tree) {
        const auto it = known.find(section);
        if (it == known.end()) fail(ErrorCode::ConfigParseError, "unknown section [" + section + "]");
        for (const auto& [key, value] : body)
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                fail(ErrorCode::ConfigParseError, "unknown key '" + key + "' in [" + section + "]");
    }

    RunConfig c;
    auto resolve = [&](const std::string& p) { return p.empty() || base_dir.empty() ? fs::path(p) : base_dir / p; };
    try {
        auto str = [&](const char* key, const std::string& fallback) { return tree.get<std::string>(key, fallback); };
        // The two-argument ptree::get falls back silently on unparsable values.
        auto get = [&]<class T>(const char* key, T fallback) {
            return tree.get_optional<std::string>(key) ? tree.get<T>(key) : fallback;
        };
        if (auto m = tree.get_optional<std::string>("data.manifest"); m && !m->empty()) c.manifest = resolve(*m);
        c.segments = get("data.segments", c.segments);
        if (auto v = tree.get_optional<std::string>("data.views")) c.views = parse_view_list(*v);
        if (auto w = tree.get_optional<std::string>("model.widths")) {
            c.model.widths.clear();
            for (const auto& f : split_csv_line(*w)) c.model.widths.push_back(std::stoul(f));
        }
        c.model.kernel = get("model.kernel", c.model.kernel);
        c.model.pool = get("model.pool", c.model.pool);
        c.model.input_shift = get("model.input_shift", c.model.input_shift);
        c.model.use_cag = get("model.use_cag", c.model.use_cag);
        c.model.learning_rate = get("model.learning_rate", c.model.learning_rate);
        c.model.momentum = get("model.momentum", c.model.momentum);
        c.model.epochs = get("model.epochs", c.model.epochs);
        c.model.batch_size = get("model.batch_size", c.model.batch_size);
        c.model.cag_init.alpha = get("cag.alpha", c.model.cag_init.alpha);
        c.model.cag_init.beta = get("cag.beta", c.model.cag_init.beta);
        c.model.cag_init.gamma = get("cag.gamma", c.model.cag_init.gamma);
        if (const auto p = str("cag.period", "auto"); p != "auto") c.cag_period = std::stod(p);
        c.folds = get("cv.folds", c.folds);
        c.seed = get("cv.seed", c.seed);
        c.t_max = get("evidence.t_max", c.t_max);
        c.h_max = get("evidence.h_max", c.h_max);
        c.evaluator = parse_evaluator(str("evidence.evaluator", "accuracy"));
        c.learner = parse_learner(str("evidence.learner", "tree"));
        c.attribute_list = parse_attribute_list(str("evidence.list", "comparative"));
        c.holdout_fraction = get("evidence.holdout", c.holdout_fraction);
        c.forest.rounds = get("evidence.forest_rounds", c.forest.rounds);
        c.forest.learning_rate = get("evidence.forest_learning_rate", c.forest.learning_rate);
        if (auto o = tree.get_optional<std::string>("output.dir"); o && !o->empty()) c.output_dir = resolve(*o);
        c.synth_count = get("synth.count", c.synth_count);
        c.synth.sample_rate = get("synth.sample_rate", c.synth.sample_rate);
        c.synth.duration_s = get("synth.duration_s", c.synth.duration_s);
        c.synth.rr_interval_s = get("synth.rr_interval_s", c.synth.rr_interval_s);
        c.synth.class_effect = get("synth.class_effect", c.synth.class_effect);
        c.synth.noise_std = get("synth.noise_std", c.synth.noise_std);
        c.synth.rr_jitter = get("synth.rr_jitter", c.synth.rr_jitter);
        c.synth.beat_jitter = get("synth.beat_jitter", c.synth.beat_jitter);
    } catch (const pt::ptree_error& e) {
        fail(ErrorCode::ConfigParseError, e.what());
    } catch (const std::invalid_argument& e) {
        fail(ErrorCode::ConfigParseError, std::string("bad number: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigParseError) throw;
        fail(ErrorCode::ConfigParseError, e.message());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    return RunConfig::from_ini(read_text_file(path), path.parent_path());
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                                     static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    for (unsigned char ch : stream) words.push_back(ch);
    std::seed_seq seq(words.begin(), words.end());
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double estimate_beats_per_record(std::span<const EcgRecord> records) {
    if (records.empty()) fail(ErrorCode::EmptyDataset, "no records to estimate the beat period from");
    constexpr std::size_t kMaxRecords = 256;
    const double fs = records.front().sample_rate;
    const auto min_lag = static_cast<std::size_t>(std::ceil(0.25 * fs));
    std::size_t max_lag = static_cast<std::size_t>(2.0 * fs);
    std::size_t used = 0;
    double total_length = 0.0;
    for (const auto& r : records.first(std::min(records.size(), kMaxRecords)))
        if (r.sample_rate == fs) max_lag = std::min(max_lag, r.samples.size() / 2);
    if (max_lag <= min_lag + 1) fail(ErrorCode::TooFewSamples, "records too short to estimate a beat period");
    std::vector<double> acf(max_lag + 1, 0.0);
    for (const auto& r : records.first(std::min(records.size(), kMaxRecords))) {
        if (r.sample_rate != fs) continue;
        const auto& x = r.samples;
        const double mu = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
        double var = 0.0;
        for (double v : x) var += (v - mu) * (v - mu);
        if (var <= 0.0) continue;
        for (std::size_t lag = min_lag - 1; lag <= max_lag; ++lag) {
            double acc = 0.0;
            for (std::size_t t = 0; t + lag < x.size(); ++t) acc += (x[t] - mu) * (x[t + lag] - mu);
            acf[lag] += acc / var * static_cast<double>(x.size()) / static_cast<double>(x.size() - lag);
        }
        total_length += static_cast<double>(x.size());
        ++used;
    }
    if (used == 0) fail(ErrorCode::NoBeatsDetected, "every record is constant");
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) top = std::max(top, acf[lag]);
    std::size_t best = 0;
    for (std::size_t lag = min_lag; lag < max_lag && best == 0; ++lag)
        if (acf[lag] >= acf[lag - 1] && acf[lag] >= acf[lag + 1] && acf[lag] >= 0.5 * top) best = lag;
    if (best == 0) fail(ErrorCode::NoBeatsDetected, "no periodicity found in the training records");
    return total_length / static_cast<double>(used) / static_cast<double>(best);
}

// ---- preprocessing ----------------------------------------------------------

std::vector<std::uint8_t> save_preprocessing(const Preprocessing& prep) {
    ByteWriter out;
    out.magic("CPRE");
    out.u32(1);
    out.u32(static_cast<std::uint32_t>(prep.segments));
    out.string(to_string(prep.views));
    const auto dim = prep.covariance ? static_cast<std::uint64_t>(prep.covariance->inverse.rows()) : 0;
    out.u64(dim);
    if (prep.covariance)
        for (Eigen::Index i = 0; i < prep.covariance->inverse.size(); ++i) out.f64(prep.covariance->inverse.data()[i]);
    out.u64(prep.scaler.lo().size());
    for (double v : prep.scaler.lo()) out.f64(v);
    for (double v : prep.scaler.hi()) out.f64(v);
    return out.data();
}

Preprocessing load_preprocessing(std::span<const std::uint8_t> bytes) {
    ByteReader in(std::vector<std::uint8_t>(bytes.begin(), bytes.end()), "preprocessing");
    if (!in.magic("CPRE")) fail(ErrorCode::VersionMismatch, "not a preprocessing file");
    if (in.u32() != 1) fail(ErrorCode::VersionMismatch, "unsupported preprocessing version");
    Preprocessing prep;
    prep.segments = in.u32();
    prep.views = parse_view_list(in.string());
    const auto dim = static_cast<Eigen::Index>(in.u64());
    if (dim > 0) {
        Eigen::MatrixXd inv(dim, dim);
        for (Eigen::Index i = 0; i < inv.size(); ++i) inv.data()[i] = in.f64();
        prep.covariance = inverse_covariance_from(inv);
    }
    const auto channels = in.u64();
    if (channels != prep.views.size()) fail(ErrorCode::CorruptCheckpoint, "scaler does not match the view list");
    std::vector<double> lo(channels), hi(channels);
    for (double& v : lo) v = in.f64();
    for (double& v : hi) v = in.f64();
    if (in.remaining() != 0) fail(ErrorCode::CorruptCheckpoint, "trailing bytes in preprocessing file");
    prep.scaler = ChannelScaler(std::move(lo), std::move(hi));
    return prep;
}

CollocativeTensor TensorCache::get(const SegmentSeries& series, std::span<const ViewSpec> views,
                                   const InverseCovariance* cov) {
    std::string cov_key;
    if (cov) {
        const auto* bytes = reinterpret_cast<const char*>(cov->inverse.data());
        cov_key = std::to_string(
            std::hash<std::string_view>{}(std::string_view(bytes, static_cast<std::size_t>(cov->inverse.size()) * 8)));
    }
    if (cov && cov_key != cov_key_) {
        std::erase_if(channels_, [](const auto& kv) { return kv.first.ends_with("|cov"); });
        cov_key_ = cov_key;
    }
    std::vector<RelationMatrix> out;
    for (const auto& v : views) {
        const bool fold_specific = v.metric == Metric::mahalanobis;
        const std::string key = series.record_id + "|" + std::to_string(series.n()) + "|" + to_string(v) +
                                (fold_specific ? "|cov" : "");
        auto it = channels_.find(key);
        if (it == channels_.end()) {
            ++misses_;
            it = channels_.emplace(key, relation_matrix(series, v, cov).values).first;
        } else {
            ++hits_;
        }
        out.push_back({it->second, v});
    }
    return compose_tensor(std::move(out));
}

// ---- workspace --------------------------------------------------------------

Workspace::Workspace(RunConfig config) : config_(std::move(config)) {}

const std::vector<EcgRecord>& Workspace::records() {
    if (!records_) {
        auto raw = load_dataset(config_.manifest_path());
        std::vector<EcgRecord> out;
        out.reserve(raw.size());
        for (auto& r : raw) {
            if (!r.annotation) {
                r.annotation = annotate_waves(r);
                r.annotation->record_id = r.id;
            }
            out.push_back(normalize(std::move(r)));
        }
        records_ = std::move(out);
        spdlog::info("loaded {} records from {}", records_->size(), config_.manifest_path().string());
    }
    return *records_;
}

const std::vector<SegmentSeries>& Workspace::series() {
    if (!series_) {
        std::vector<SegmentSeries> out;
        for (const auto& r : records()) out.push_back(segment(r, config_.segments));
        series_ = std::move(out);
    }
    return *series_;
}

std::vector<std::size_t> Workspace::labels() {
    std::vector<std::size_t> out;
    for (const auto& r : records()) out.push_back(static_cast<std::size_t>(r.label));
    return out;
}

const std::vector<std::vector<std::size_t>>& Workspace::folds() {
    if (!folds_) folds_ = make_folds(labels(), config_.folds, derive_seed(config_.seed, "folds"));
    return *folds_;
}

Preprocessing Workspace::fit_preprocessing(std::span<const std::size_t> train) {
    Preprocessing prep;
    prep.segments = config_.segments;
    prep.views = config_.views;
    const bool needs_cov = std::any_of(prep.views.begin(), prep.views.end(),
                                       [](const ViewSpec& v) { return v.metric == Metric::mahalanobis; });
    if (needs_cov) {
        std::vector<SegmentSeries> subset;
        for (auto i : train) subset.push_back(series()[i]);
        prep.covariance = estimate_inverse_covariance(subset);
    }
    std::vector<double> lo, hi;
    for (auto i : train) {
        const auto t = cache_.get(series()[i], prep.views, prep.covariance ? &*prep.covariance : nullptr);
        const auto s = ChannelScaler::fit(std::span(&t, 1));
        if (lo.empty()) {
            lo = s.lo();
            hi = s.hi();
        }
        for (std::size_t c = 0; c < lo.size(); ++c) {
            lo[c] = std::min(lo[c], s.lo()[c]);
            hi[c] = std::max(hi[c], s.hi()[c]);
        }
    }
    prep.scaler = ChannelScaler(std::move(lo), std::move(hi));
    return prep;
}

std::vector<double> Workspace::network_input(std::size_t record, const Preprocessing& prep) {
    if (prep.segments != config_.segments)
        fail(ErrorCode::ShapeMismatch, "preprocessing was fitted for n = " + std::to_string(prep.segments));
    const auto t = cache_.get(series()[record], prep.views, prep.covariance ? &*prep.covariance : nullptr);
    return prep.scaler.transform(t);
}

// ---- files ------------------------------------------------------------------

FoldArtifacts fold_paths(const fs::path& out, std::size_t fold) {
    char name[32];
    std::snprintf(name, sizeof name, "fold_%02zu", fold);
    return {out / "checkpoints" / (std::string(name) + ".cckp"), out / "checkpoints" / (std::string(name) + ".prep")};
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorCode::IoError, "sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

void write_record_saliency(const fs::path& path, const std::vector<RecordSaliency>& maps) {
    ByteWriter out;
    out.magic("SMAP");
    out.u32(static_cast<std::uint32_t>(maps.size()));
    const auto n = maps.empty() ? 0 : static_cast<std::uint32_t>(maps.front().values.rows());
    out.u32(n);
    for (const auto& m : maps) {
        if (m.values.rows() != n || m.values.cols() != n) fail(ErrorCode::ShapeMismatch, "saliency maps differ in size");
        out.string(m.record_id);
        out.u32(static_cast<std::uint32_t>(m.class_id));
        for (Eigen::Index i = 0; i < m.values.rows(); ++i)
            for (Eigen::Index j = 0; j < m.values.cols(); ++j) out.f64(m.values(i, j));
    }
    out.save(path);
}

std::vector<RecordSaliency> read_record_saliency(const fs::path& path) {
    ByteReader in(read_file_bytes(path), path.string());
    if (!in.magic("SMAP")) fail(ErrorCode::IoError, path.string() + ": not a saliency store");
    const auto count = in.u32();
    const auto n = static_cast<Eigen::Index>(in.u32());
    std::vector<RecordSaliency> out(count);
    for (auto& m : out) {
        m.record_id = in.string();
        m.class_id = in.u32();
        m.values.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) m.values(i, j) = in.f64();
    }
    return out;
}

namespace {

std::string with_seed_column(const std::string& csv, std::uint64_t seed) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        out << line << ',' << (header ? std::string("seed") : std::to_string(seed)) << '\n';
        header = false;
    }
    return out.str();
}

void write_config(const Workspace& ws) { write_text_file(ws.out() / "config.ini", ws.config().to_ini()); }

void write_lock(const RunConfig& config) {
    const fs::path manifest = config.manifest_path();
    const fs::path base = manifest.parent_path();
    std::ostringstream out;
    auto entry = [&](const fs::path& p, const std::string& label) {
        out << sha256_hex(read_file_bytes(p)) << "  " << label << '\n';
    };
    entry(manifest, manifest.filename().string());
    for (const auto& e : read_manifest(manifest)) {
        entry(e.signal_path, e.signal_path.lexically_relative(base).generic_string());
        if (e.annotation_path) entry(*e.annotation_path, e.annotation_path->lexically_relative(base).generic_string());
    }
    const auto text = config.to_ini();
    out << sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size())) << "  config.ini\n";
    write_text_file(config.output_dir / "MANIFEST.lock", out.str());
}

struct LoadedFold {
    Model model;
    Preprocessing prep;
};

LoadedFold load_fold(const fs::path& out, std::size_t fold) {
    const auto paths = fold_paths(out, fold);
    auto cp = load_checkpoint(read_file_bytes(paths.checkpoint));
    return {std::move(cp.model), load_preprocessing(read_file_bytes(paths.preprocessing))};
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Eigen::MatrixXd read_rating_matrix(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::getline(in, line);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) fail(ErrorCode::IoError, path.string() + ": too few rows");
        const auto fields = split_csv_line(line);
        if (static_cast<Eigen::Index>(fields.size()) != cols + 1)
            fail(ErrorCode::IoError, path.string() + ": wrong column count");
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = std::stod(fields[static_cast<std::size_t>(j) + 1]);
    }
    return m;
}

std::string rating_matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& row_names,
                              const std::vector<std::string>& col_names) {
    std::ostringstream out;
    out << "genre";
    for (const auto& c : col_names) out << ',' << c;
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << row_names[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
        out << '\n';
    }
    return out.str();
}

std::vector<std::string> genre_names() {
    std::vector<std::string> out;
    for (Genre g : all_genres()) out.emplace_back(to_string(g));
    return out;
}

}  // namespace

// ---- stages -----------------------------------------------------------------

fs::path stage_synth(const RunConfig& config) {
    config.validate(false);
    const fs::path manifest = config.manifest_path();
    const fs::path base = manifest.parent_path();
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < config.synth_count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "rec_%05zu", i);
        const Label label = i % 2 == 0 ? Label::non_eating : Label::eating;
        auto record = synthesize_ecg(config.synth, label, derive_seed(config.seed, "synth", i));
        record.id = id;
        const fs::path signal = fs::path("signals") / (std::string(id) + ".cecg");
        const fs::path annotation = fs::path("annotations") / (std::string(id) + ".csv");
        write_signal_file(base / signal, record);
        write_annotation_file(base / annotation, *record.annotation);
        entries.push_back({id, label, signal, annotation});
    }
    write_manifest(manifest, entries);
    spdlog::info("synthesized {} records into {}", entries.size(), base.string());
    return manifest;
}

void stage_train(Workspace& ws) {
    const auto& cfg = ws.config();
    cfg.validate(true);
    write_config(ws);
    write_lock(cfg);
    const auto& folds = ws.folds();
    const auto& records = ws.records();
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> fit;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) fit.insert(fit.end(), folds[g].begin(), folds[g].end());
        std::sort(fit.begin(), fit.end());

        const auto prep = ws.fit_preprocessing(fit);
        ModelConfig mc = cfg.model;
        mc.input_size = cfg.segments;
        mc.input_channels = cfg.views.size();
        mc.seed = derive_seed(cfg.seed, "model", f);
        if (cfg.cag_period) {
            mc.cag_init.period = *cfg.cag_period;
        } else {
            std::vector<EcgRecord> subset;
            for (auto i : fit) {
                if (subset.size() == 256) break;
                subset.push_back(records[i]);
            }
            mc.cag_init.period = estimate_beats_per_record(subset);
        }
        std::vector<Example> examples;
        examples.reserve(fit.size());
        for (auto i : fit) examples.push_back({ws.network_input(i, prep), static_cast<std::size_t>(records[i].label)});
        const auto cp = train(examples, mc);
        const auto paths = fold_paths(ws.out(), f);
        write_file_bytes(paths.checkpoint, save_checkpoint(cp));
        write_file_bytes(paths.preprocessing, save_preprocessing(prep));
        spdlog::info("fold {}/{}: trained on {} records, period {:.3f}, final loss {:.4f}", f + 1, folds.size(),
                     fit.size(), mc.cag_init.period, cp.log.epoch_loss.empty() ? 0.0 : cp.log.epoch_loss.back());
    }
}

CvResult stage_eval(Workspace& ws) {
    const auto& cfg = ws.config();
    write_config(ws);
    const auto& folds = ws.folds();
    const auto& records = ws.records();
    std::ostringstream predictions;
    predictions << "record_id,fold,label,prediction,p_eating\n";
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t, double>> rows;  // record, fold, pred, p
    std::vector<Metrics> per_fold;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto fold = load_fold(ws.out(), f);
        std::vector<std::size_t> pred, truth;
        for (auto i : folds[f]) {
            const auto cache = forward(fold.model, ws.network_input(i, fold.prep));
            pred.push_back(argmax(cache.probabilities));
            truth.push_back(static_cast<std::size_t>(records[i].label));
            rows.emplace_back(i, f, pred.back(), cache.probabilities.at(1));
        }
        per_fold.push_back(compute_metrics(pred, truth));
        spdlog::info("fold {}/{}: accuracy {:.2f}%", f + 1, folds.size(), per_fold.back().accuracy);
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [i, f, p, prob] : rows)
        predictions << records[i].id << ',' << f << ',' << static_cast<int>(records[i].label) << ',' << p << ','
                    << format_double(prob) << '\n';
    auto result = summarize(std::move(per_fold));
    write_text_file(ws.out() / "predictions.csv", with_seed_column(predictions.str(), cfg.seed));
    write_text_file(ws.out() / "metrics.csv", with_seed_column(metrics_csv(result), cfg.seed));
    return result;
}

void stage_saliency(Workspace& ws) {
    const auto& cfg = ws.config();
    write_config(ws);
    const auto& folds = ws.folds();
    const auto& records = ws.records();
    std::vector<std::pair<std::size_t, RecordSaliency>> maps;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto fold = load_fold(ws.out(), f);
        for (auto i : folds[f]) {
            const auto input = ws.network_input(i, fold.prep);
            const auto label = static_cast<std::size_t>(records[i].label);
            if (predict(fold.model, input) != label) continue;
            auto sal = compute_saliency(fold.model, input, label);
            maps.push_back({i, {records[i].id, label, std::move(sal.values)}});
        }
    }
    std::sort(maps.begin(), maps.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<RecordSaliency> ordered;
    for (auto& [i, m] : maps) ordered.push_back(std::move(m));

    const auto n = static_cast<Eigen::Index>(cfg.segments);
    std::ostringstream summary;
    summary << "class,records\n";
    for (std::size_t c = 0; c < cfg.model.num_classes; ++c) {
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
        std::size_t count = 0;
        for (const auto& m : ordered)
            if (m.class_id == c) {
                mean += m.values;
                ++count;
            }
        if (count > 0) mean /= static_cast<double>(count);
        const auto stem = ws.out() / "saliency" / ("class_" + std::to_string(c));
        write_matrix_csv(stem.string() + ".csv", mean);
        write_heatmap_svg(stem.string() + ".svg", mean,
                          "class " + std::to_string(c) + " mean saliency (" + std::to_string(count) + " records)");
        summary << c << ',' << count << '\n';
    }
    write_record_saliency(ws.out() / "saliency" / "records.smap", ordered);
    write_text_file(ws.out() / "saliency" / "summary.csv", with_seed_column(summary.str(), cfg.seed));
    spdlog::info("saliency maps for {} correctly classified test records", ordered.size());
}

void stage_decode(Workspace& ws) {
    const auto& cfg = ws.config();
    write_config(ws);
    const auto& records = ws.records();
    const auto& series = ws.series();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < records.size(); ++i) index[records[i].id] = i;
    RatingAccumulator acc;
    for (const auto& m : read_record_saliency(ws.out() / "saliency" / "records.smap")) {
        const auto it = index.find(m.record_id);
        if (it == index.end()) fail(ErrorCode::RecordMismatch, "saliency for unknown record '" + m.record_id + "'");
        const auto membership = membership_matrix(*records[it->second].annotation, series[it->second], all_genres());
        acc.add(unary_rating(m.values, membership), pairwise_rating(m.values, membership));
    }
    const auto names = genre_names();
    write_text_file(ws.out() / "ratings" / "unary.csv",
                    rating_matrix_csv(acc.mean_unary(), names, {"rating"}));
    write_text_file(ws.out() / "ratings" / "pairwise.csv", rating_matrix_csv(acc.mean_pairs(), names, names));
    spdlog::info("decoded genre ratings from {} saliency maps", acc.count());
    (void)cfg;
}

AttributeRanking stage_rank(Workspace& ws) {
    const auto& cfg = ws.config();
    write_config(ws);
    const auto g = static_cast<Eigen::Index>(kGenreCount);
    const Eigen::VectorXd unary = read_rating_matrix(ws.out() / "ratings" / "unary.csv", g, 1).col(0);
    const Eigen::MatrixXd pairs = read_rating_matrix(ws.out() / "ratings" / "pairwise.csv", g, g);
    auto ranking = rank_attributes(unary, pairs);
    write_text_file(ws.out() / "rankings.csv", with_seed_column(ranking_csv(ranking), cfg.seed));
    spdlog::info("top comparative attribute {}", ranking.comparative.front().attribute.name());
    return ranking;
}

TreeSummary stage_trees(Workspace& ws) {
    const auto& cfg = ws.config();
    write_config(ws);
    const auto ranking = parse_ranking_csv(read_text_file(ws.out() / "rankings.csv"));
    const auto list = cfg.attribute_list == AttributeList::unary ? ranking.unary_list() : ranking.comparative_list();
    const auto& records = ws.records();
    std::vector<WaveAnnotation> annotations;
    for (const auto& r : records) annotations.push_back(*r.annotation);
    const auto table = attribute_table(records, annotations, list);

    auto [pool, heldout] = stratified_split(table.labels, 1.0 - cfg.holdout_fraction, derive_seed(cfg.seed, "holdout"));
    if (heldout.empty()) fail(ErrorCode::TooFewRecords, "no records left for the held-out set");
    SelectionConfig sc;
    sc.t_max = std::min(cfg.t_max, list.size());
    sc.h_max = cfg.h_max;
    sc.evaluator = cfg.evaluator;
    sc.learner = cfg.learner;
    sc.forest = cfg.forest;
    sc.forest.seed = derive_seed(cfg.seed, "forest");
    sc.seed = derive_seed(cfg.seed, "select");
    const auto sel = select_attributes(list, table, pool, sc);

    TreeSummary summary;
    summary.t = sel.t;
    summary.h = sel.h;
    summary.selection_score = sel.score;
    summary.attributes = sel.attributes;
    std::vector<std::size_t> pred, truth;
    const auto features = prefix_features(sel.t);
    const fs::path dir = ws.out() / "trees";
    if (cfg.learner == Learner::tree) {
        const auto tree = build_tree(table, pool, features, sel.h);
        for (auto r : heldout) pred.push_back(tree.predict(table.rows[r]));
        summary.height = tree.height();
        write_text_file(dir / "tree.txt", tree_text(tree));
        write_text_file(dir / "tree.graph", tree_graph(tree));
        write_text_file(dir / "tree.svg", tree_svg(tree));
    } else {
        ForestConfig fc = sc.forest;
        fc.max_depth = sel.h;
        const auto forest = build_forest(table, pool, features, fc);
        for (auto r : heldout) pred.push_back(forest.predict(table.rows[r]));
        summary.height = sel.h;
        std::ostringstream text;
        text << "rounds " << forest.rounds << "\nlearning_rate " << format_double(forest.learning_rate) << "\ninit "
             << format_double(forest.init) << "\ntrees " << forest.trees.size() << '\n';
        write_text_file(dir / "forest.txt", text.str());
    }
    for (auto r : heldout) truth.push_back(table.labels[r]);
    summary.heldout = compute_metrics(pred, truth);

    std::ostringstream grid;
    grid << "t,h,score\n";
    for (std::size_t t = 1; t <= sel.grid.size(); ++t)
        for (std::size_t h = 1; h <= sel.grid[t - 1].size(); ++h)
            grid << t << ',' << h << ',' << format_double(sel.grid[t - 1][h - 1]) << '\n';
    write_text_file(dir / "grid.csv", with_seed_column(grid.str(), cfg.seed));

    std::ostringstream s;
    s << "learner,list,t,h,height,selection_score,heldout_accuracy,heldout_f1,attributes\n"
      << to_string(cfg.learner) << ',' << to_string(cfg.attribute_list) << ',' << summary.t << ',' << summary.h << ','
      << summary.height << ',' << format_double(summary.selection_score) << ','
      << format_double(summary.heldout.accuracy) << ',' << format_double(summary.heldout.f1) << ",\"";
    for (std::size_t i = 0; i < summary.attributes.size(); ++i) s << (i ? " " : "") << summary.attributes[i].name();
    s << "\"\n";
    write_text_file(dir / "summary.csv", with_seed_column(s.str(), cfg.seed));
    spdlog::info("selected t={} h={} (score {:.2f}), held-out accuracy {:.2f}%", summary.t, summary.h,
                 summary.selection_score, summary.heldout.accuracy);
    return summary;
}

void stage_report(Workspace& ws) {
    write_config(ws);
    const fs::path out = ws.out();
    std::ostringstream r;
    r << "# Experiment report\n\n";
    r << "## Cross-validation\n\n```\n" << read_text_file(out / "metrics.csv") << "```\n\n";
    const auto ranking = parse_ranking_csv(read_text_file(out / "rankings.csv"));
    r << "## Top comparative attributes\n\n| rank | attribute | score |\n|---|---|---|\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(10, ranking.comparative.size()); ++i)
        r << "| " << i + 1 << " | " << ranking.comparative[i].attribute.name() << " | "
          << format_double(ranking.comparative[i].score) << " |\n";
    r << "\n## Top unary attributes\n\n| rank | attribute | score |\n|---|---|---|\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(10, ranking.unary.size()); ++i)
        r << "| " << i + 1 << " | " << ranking.unary[i].attribute.name() << " | "
          << format_double(ranking.unary[i].score) << " |\n";
    r << "\n## Evidence tree\n\n```\n" << read_text_file(out / "trees" / "summary.csv") << "```\n\n";
    if (fs::exists(out / "trees" / "tree.txt")) r << "```\n" << read_text_file(out / "trees" / "tree.txt") << "```\n";
    r << "\nSaliency heatmaps: `saliency/class_0.svg`, `saliency/class_1.svg`.\n";
    write_text_file(out / "report.md", r.str());
}

ExperimentResult run_experiment(const RunConfig& config) {
    Workspace ws(config);
    with_stage("ingest", [&] {
        config.validate(true);
        ws.records();
        ws.series();
    });
    ExperimentResult result;
    with_stage("train", [&] { stage_train(ws); });
    result.metrics = with_stage("eval", [&] { return stage_eval(ws); });
    with_stage("saliency", [&] { stage_saliency(ws); });
    with_stage("decode", [&] { stage_decode(ws); });
    result.ranking = with_stage("rank", [&] { return stage_rank(ws); });
    result.tree = with_stage("trees", [&] { return stage_trees(ws); });
    with_stage("report", [&] { stage_report(ws); });
    for (std::size_t f = 0; f < config.folds; ++f) result.checkpoints.push_back(fold_paths(config.output_dir, f).checkpoint);
    for (std::size_t c = 0; c < config.model.num_classes; ++c) {
        SaliencyMap m;
        m.class_id = c;
        m.values = read_matrix_csv(config.output_dir / "saliency" / ("class_" + std::to_string(c) + ".csv"));
        result.class_saliency.push_back(std::move(m));
    }
    return result;
}

}  // namespace collo
