#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collo/signal.hpp"

namespace collo {

enum class Metric { euclidean, manhattan, cosine, mahalanobis, max, avg, min };

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);
bool is_symmetric(Metric metric);

/// One channel of the collocative tensor: metric for off-diagonal cells and
/// feature for the diagonal (and for the max/avg/min summary metrics).
struct ViewSpec {
    Metric metric = Metric::euclidean;
    FeatureKind feature = FeatureKind::mean;

    bool operator==(const ViewSpec&) const = default;
};

std::string to_string(const ViewSpec& view);       // "metric:feature"
ViewSpec parse_view(std::string_view text);
std::vector<ViewSpec> parse_view_list(std::string_view text);  // comma separated
std::string to_string(const std::vector<ViewSpec>& views);

/// Euclidean, Manhattan, Cosine, Mahalanobis, Max, Avg, Min.
std::vector<ViewSpec> default_views();

/// Inverse of the regularised covariance of segment vectors, plus a whitening
/// factor W with W^T W = inverse so Mahalanobis distances reduce to Euclidean
/// distances between W s.
struct InverseCovariance {
    Eigen::MatrixXd inverse;
    Eigen::MatrixXd whitening;
};

/// Covariance of all given segments regularised as S + eps I with
/// eps = 1e-3 * trace(S) / dim.
InverseCovariance estimate_inverse_covariance(std::span<const SegmentSeries> series);
InverseCovariance inverse_covariance_from(const Eigen::MatrixXd& inverse);

double metric_eval(std::span<const double> a, std::span<const double> b, const ViewSpec& view,
                   const InverseCovariance* cov = nullptr);

struct RelationMatrix {
    Eigen::MatrixXd values;
    ViewSpec view;
};

/// Off-diagonal cells hold metric(s_i, s_j); the diagonal holds feature(s_i).
RelationMatrix relation_matrix(const SegmentSeries& series, const ViewSpec& view,
                               const InverseCovariance* cov = nullptr);

struct CollocativeTensor {
    std::vector<RelationMatrix> channels;

    std::size_t n() const { return channels.empty() ? 0 : static_cast<std::size_t>(channels.front().values.rows()); }
    std::size_t views() const { return channels.size(); }
};

CollocativeTensor compose_tensor(std::vector<RelationMatrix> matrices);
std::vector<RelationMatrix> split(const CollocativeTensor& tensor);

CollocativeTensor build_tensor(const SegmentSeries& series, std::span<const ViewSpec> views,
                               const InverseCovariance* cov = nullptr);

/// Per-channel min-max scaling fitted on a training set.
class ChannelScaler {
public:
    ChannelScaler() = default;
    ChannelScaler(std::vector<double> lo, std::vector<double> hi);

    static ChannelScaler fit(std::span<const CollocativeTensor> tensors);

    /// Flattened channel-major network input with every channel mapped to
    /// [0, 1] on the fitted range (constant channels map to 0).
    std::vector<double> transform(const CollocativeTensor& tensor) const;

    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }

private:
    std::vector<double> lo_, hi_;
};

// Tensor dump: magic "CTEN", u32 n, u32 views, u32 reserved, then float32
// values channel-major, row-major within a channel.
void write_tensor_dump(const std::filesystem::path& path, const CollocativeTensor& tensor);
CollocativeTensor read_tensor_dump(const std::filesystem::path& path);

}  // namespace collo
