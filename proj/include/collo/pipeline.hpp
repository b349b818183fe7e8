#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "collo/collocative.hpp"
#include "collo/eval.hpp"
#include "collo/evidence.hpp"
#include "collo/network.hpp"
#include "collo/saliency.hpp"
#include "collo/signal.hpp"

namespace collo {

enum class AttributeList { unary, comparative };
std::string_view to_string(AttributeList list);
AttributeList parse_attribute_list(std::string_view text);

struct RunConfig {
    std::filesystem::path manifest;  // empty: <output_dir>/data/manifest.csv
    std::filesystem::path output_dir = "out";
    std::size_t segments = 64;
    std::vector<ViewSpec> views = default_views();
    ModelConfig model;  // input_size, input_channels and seed are filled per fold
    std::optional<double> cag_period;  // nullopt: estimated from the training records
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    std::size_t t_max = 10;
    std::size_t h_max = 6;
    Evaluator evaluator = Evaluator::accuracy;
    Learner learner = Learner::tree;
    AttributeList attribute_list = AttributeList::comparative;
    double holdout_fraction = 0.2;
    ForestConfig forest{};
    SyntheticParams synth{};
    std::size_t synth_count = 200;

    std::filesystem::path manifest_path() const;
    /// Checks numeric bounds; with `need_manifest` also that the manifest exists.
    void validate(bool need_manifest) const;

    std::string to_ini() const;
    /// Relative paths resolve against `base_dir`.
    static RunConfig from_ini(std::string_view text, const std::filesystem::path& base_dir = {});
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Independent stream seed derived from the root seed and a stream label.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

/// Beats per record from the first peak of the records' mean autocorrelation.
double estimate_beats_per_record(std::span<const EcgRecord> records);

/// Per-fold preprocessing fitted on the training records.
struct Preprocessing {
    std::size_t segments = 0;
    std::vector<ViewSpec> views;
    std::optional<InverseCovariance> covariance;
    ChannelScaler scaler;
};

std::vector<std::uint8_t> save_preprocessing(const Preprocessing& prep);
Preprocessing load_preprocessing(std::span<const std::uint8_t> bytes);

/// Relation matrices cached per (record id, n, view, covariance fingerprint).
/// Only the most recent covariance is kept.
class TensorCache {
public:
    CollocativeTensor get(const SegmentSeries& series, std::span<const ViewSpec> views,
                          const InverseCovariance* cov);
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    std::map<std::string, Eigen::MatrixXd> channels_;
    std::string cov_key_;
    std::size_t hits_ = 0, misses_ = 0;
};

/// Loaded inputs shared by the stages of one process.
class Workspace {
public:
    explicit Workspace(RunConfig config);

    const RunConfig& config() const { return config_; }
    const std::filesystem::path& out() const { return config_.output_dir; }

    const std::vector<EcgRecord>& records();  // z-scored, annotation attached
    const std::vector<SegmentSeries>& series();
    std::vector<std::size_t> labels();
    const std::vector<std::vector<std::size_t>>& folds();

    std::vector<double> network_input(std::size_t record, const Preprocessing& prep);
    Preprocessing fit_preprocessing(std::span<const std::size_t> train);

private:
    RunConfig config_;
    std::optional<std::vector<EcgRecord>> records_;
    std::optional<std::vector<SegmentSeries>> series_;
    std::optional<std::vector<std::vector<std::size_t>>> folds_;
    TensorCache cache_;
};

struct FoldArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path preprocessing;
};

FoldArtifacts fold_paths(const std::filesystem::path& out, std::size_t fold);

std::filesystem::path stage_synth(const RunConfig& config);
void stage_train(Workspace& ws);
CvResult stage_eval(Workspace& ws);
void stage_saliency(Workspace& ws);
void stage_decode(Workspace& ws);
AttributeRanking stage_rank(Workspace& ws);
struct TreeSummary {
    std::size_t t = 0;
    std::size_t h = 0;
    double selection_score = 0.0;
    Metrics heldout;
    std::vector<Attribute> attributes;
    std::size_t height = 0;
};
TreeSummary stage_trees(Workspace& ws);
void stage_report(Workspace& ws);

struct ExperimentResult {
    std::vector<std::filesystem::path> checkpoints;
    CvResult metrics;
    std::vector<SaliencyMap> class_saliency;
    AttributeRanking ranking;
    TreeSummary tree;
};

/// Every stage in order on one workspace; errors name the failing stage.
ExperimentResult run_experiment(const RunConfig& config);

/// Runs `body`, re-raising library errors with the stage name prefixed.
template <typename F>
auto with_stage(std::string_view stage, F&& body) -> decltype(body());

// Per-record saliency store: magic "SMAP", u32 count, u32 n, then per record a
// u32-prefixed id, u32 class and n*n float64 values.
struct RecordSaliency {
    std::string record_id;
    std::size_t class_id = 0;
    Eigen::MatrixXd values;
};
void write_record_saliency(const std::filesystem::path& path, const std::vector<RecordSaliency>& maps);
std::vector<RecordSaliency> read_record_saliency(const std::filesystem::path& path);

std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace collo

#include "collo/error.hpp"

template <typename F>
auto collo::with_stage(std::string_view stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(e.code(), "stage '" + std::string(stage) + "': " + e.message());
    }
}
