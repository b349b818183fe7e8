#include "collo/collocative.hpp"

#include <algorithm>
#include <cmath>

#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::euclidean: return "euclidean";
        case Metric::manhattan: return "manhattan";
        case Metric::cosine: return "cosine";
        case Metric::mahalanobis: return "mahalanobis";
        case Metric::max: return "max";
        case Metric::avg: return "avg";
        case Metric::min: return "min";
    }
    return "?";
}

Metric parse_metric(std::string_view text) {
    for (Metric m : {Metric::euclidean, Metric::manhattan, Metric::cosine, Metric::mahalanobis, Metric::max,
                     Metric::avg, Metric::min})
        if (to_string(m) == text) return m;
    fail(ErrorCode::InvalidArgument, "unknown metric '" + std::string(text) + "'");
}

bool is_symmetric(Metric) { return true; }

std::string to_string(const ViewSpec& view) {
    return std::string(to_string(view.metric)) + ":" + std::string(to_string(view.feature));
}

ViewSpec parse_view(std::string_view text) {
    const auto colon = text.find(':');
    ViewSpec view;
    view.metric = parse_metric(text.substr(0, colon));
    if (colon != std::string_view::npos) view.feature = parse_feature_kind(text.substr(colon + 1));
    return view;
}

std::vector<ViewSpec> parse_view_list(std::string_view text) {
    std::vector<ViewSpec> views;
    for (const auto& field : split_csv_line(text))
        if (!field.empty()) views.push_back(parse_view(field));
    if (views.empty()) fail(ErrorCode::EmptyViewList, "view list is empty");
    return views;
}

std::string to_string(const std::vector<ViewSpec>& views) {
    std::string out;
    for (const auto& v : views) {
        if (!out.empty()) out += ',';
        out += to_string(v);
    }
    return out;
}

std::vector<ViewSpec> default_views() {
    return {
        {Metric::euclidean, FeatureKind::mean}, {Metric::manhattan, FeatureKind::std},
        {Metric::cosine, FeatureKind::mean},    {Metric::mahalanobis, FeatureKind::mean},
        {Metric::max, FeatureKind::mean},       {Metric::avg, FeatureKind::std},
        {Metric::min, FeatureKind::mean},
    };
}

InverseCovariance inverse_covariance_from(const Eigen::MatrixXd& inverse) {
    Eigen::LLT<Eigen::MatrixXd> llt(inverse);
    if (llt.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "inverse covariance is not positive definite");
    return {inverse, llt.matrixL().transpose()};
}

InverseCovariance estimate_inverse_covariance(std::span<const SegmentSeries> series) {
    std::size_t dim = 0;
    std::size_t count = 0;
    for (const auto& s : series)
        for (const auto& seg : s.segments) {
            if (dim == 0) dim = seg.size();
            if (seg.size() != dim) fail(ErrorCode::LengthMismatch, "segments of different lengths");
            ++count;
        }
    if (count < 2) fail(ErrorCode::EmptyDataset, "covariance needs at least two segments");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& s : series)
        for (const auto& seg : s.segments) mean += Eigen::Map<const Eigen::VectorXd>(seg.data(), mean.size());
    mean /= static_cast<double>(count);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
    for (const auto& s : series)
        for (const auto& seg : s.segments) {
            const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(seg.data(), mean.size()) - mean;
            cov.selfadjointView<Eigen::Lower>().rankUpdate(d);
        }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(count);

    double eps = 1e-3 * cov.trace() / static_cast<double>(dim);
    if (!(eps > 0.0)) eps = 1e-9;
    cov.diagonal().array() += eps;

    // Sigma = L L^T  =>  Sigma^-1 = L^-T L^-1, so the whitening factor is L^-1.
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    Eigen::MatrixXd whitening = llt.matrixL().solve(identity);
    Eigen::MatrixXd inverse = whitening.transpose() * whitening;
    return {std::move(inverse), std::move(whitening)};
}

namespace {

double summary_metric(std::span<const double> a, std::span<const double> b, const ViewSpec& view) {
    const double fa = extract_feature(a, view.feature);
    const double fb = extract_feature(b, view.feature);
    switch (view.metric) {
        case Metric::max: return std::max(fa, fb);
        case Metric::min: return std::min(fa, fb);
        default: return 0.5 * (fa + fb);
    }
}

}  // namespace

double metric_eval(std::span<const double> a, std::span<const double> b, const ViewSpec& view,
                   const InverseCovariance* cov) {
    if (a.size() != b.size())
        fail(ErrorCode::LengthMismatch,
             "windows of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    switch (view.metric) {
        case Metric::euclidean: {
            double ss = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) ss += (a[k] - b[k]) * (a[k] - b[k]);
            return std::sqrt(ss);
        }
        case Metric::manhattan: {
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
            return s;
        }
        case Metric::cosine: {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) {
                dot += a[k] * b[k];
                na += a[k] * a[k];
                nb += b[k] * b[k];
            }
            if (na == 0.0 || nb == 0.0) return 0.0;
            return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
        }
        case Metric::mahalanobis: {
            if (cov == nullptr) fail(ErrorCode::MissingCovariance, "mahalanobis metric needs an inverse covariance");
            const auto dim = static_cast<Eigen::Index>(a.size());
            if (cov->inverse.rows() != dim) fail(ErrorCode::LengthMismatch, "covariance dimension mismatch");
            const Eigen::VectorXd d =
                Eigen::Map<const Eigen::VectorXd>(a.data(), dim) - Eigen::Map<const Eigen::VectorXd>(b.data(), dim);
            return std::sqrt(std::max(0.0, d.dot(cov->inverse * d)));
        }
        case Metric::max:
        case Metric::avg:
        case Metric::min:
            return summary_metric(a, b, view);
    }
    return 0.0;
}

RelationMatrix relation_matrix(const SegmentSeries& series, const ViewSpec& view, const InverseCovariance* cov) {
    const std::size_t n = series.n();
    if (n < 2) fail(ErrorCode::InvalidArgument, "relation matrix needs at least two segments");
    RelationMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)), view};
    auto& R = out.values;

    if (view.metric == Metric::mahalanobis) {
        if (cov == nullptr) fail(ErrorCode::MissingCovariance, "mahalanobis view needs an inverse covariance");
        const auto dim = static_cast<Eigen::Index>(series.window);
        if (cov->whitening.rows() != dim) fail(ErrorCode::LengthMismatch, "covariance dimension mismatch");
        Eigen::MatrixXd white(dim, static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            white.col(static_cast<Eigen::Index>(i)) =
                cov->whitening * Eigen::Map<const Eigen::VectorXd>(series.segments[i].data(), dim);
        for (Eigen::Index i = 0; i < R.rows(); ++i)
            for (Eigen::Index j = i + 1; j < R.cols(); ++j) R(i, j) = R(j, i) = (white.col(i) - white.col(j)).norm();
    } else if (view.metric == Metric::max || view.metric == Metric::avg || view.metric == Metric::min) {
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = extract_feature(series.segments[i], view.feature);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = view.metric == Metric::max   ? std::max(f[i], f[j])
                                 : view.metric == Metric::min ? std::min(f[i], f[j])
                                                              : 0.5 * (f[i] + f[j]);
                R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
                R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
            }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = metric_eval(series.segments[i], series.segments[j], view, cov);
                R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
                R(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = extract_feature(series.segments[i], view.feature);
    return out;
}

CollocativeTensor compose_tensor(std::vector<RelationMatrix> matrices) {
    if (matrices.empty()) fail(ErrorCode::EmptyViewList, "a tensor needs at least one view");
    const auto n = matrices.front().values.rows();
    for (const auto& m : matrices)
        if (m.values.rows() != n || m.values.cols() != n)
            fail(ErrorCode::ShapeMismatch, "all views must share the same n x n shape");
    return CollocativeTensor{std::move(matrices)};
}

std::vector<RelationMatrix> split(const CollocativeTensor& tensor) { return tensor.channels; }

CollocativeTensor build_tensor(const SegmentSeries& series, std::span<const ViewSpec> views,
                               const InverseCovariance* cov) {
    std::vector<RelationMatrix> matrices;
    matrices.reserve(views.size());
    for (const auto& view : views) matrices.push_back(relation_matrix(series, view, cov));
    return compose_tensor(std::move(matrices));
}

ChannelScaler::ChannelScaler(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) fail(ErrorCode::ShapeMismatch, "scaler bounds differ in length");
}

ChannelScaler ChannelScaler::fit(std::span<const CollocativeTensor> tensors) {
    if (tensors.empty()) fail(ErrorCode::EmptyDataset, "cannot fit a scaler on no tensors");
    const std::size_t m = tensors.front().views();
    std::vector<double> lo(m, std::numeric_limits<double>::infinity());
    std::vector<double> hi(m, -std::numeric_limits<double>::infinity());
    for (const auto& t : tensors) {
        if (t.views() != m) fail(ErrorCode::ShapeMismatch, "tensors differ in view count");
        for (std::size_t c = 0; c < m; ++c) {
            lo[c] = std::min(lo[c], t.channels[c].values.minCoeff());
            hi[c] = std::max(hi[c], t.channels[c].values.maxCoeff());
        }
    }
    return ChannelScaler(std::move(lo), std::move(hi));
}

std::vector<double> ChannelScaler::transform(const CollocativeTensor& tensor) const {
    if (tensor.views() != lo_.size()) fail(ErrorCode::ShapeMismatch, "tensor view count differs from scaler");
    const std::size_t n = tensor.n();
    std::vector<double> out(tensor.views() * n * n);
    std::size_t k = 0;
    for (std::size_t c = 0; c < tensor.views(); ++c) {
        const double span = hi_[c] - lo_[c];
        const auto& R = tensor.channels[c].values;
        for (Eigen::Index i = 0; i < R.rows(); ++i)
            for (Eigen::Index j = 0; j < R.cols(); ++j) out[k++] = span > 0.0 ? (R(i, j) - lo_[c]) / span : 0.0;
    }
    return out;
}

void write_tensor_dump(const std::filesystem::path& path, const CollocativeTensor& tensor) {
    ByteWriter out;
    out.magic("CTEN");
    out.u32(static_cast<std::uint32_t>(tensor.n()));
    out.u32(static_cast<std::uint32_t>(tensor.views()));
    out.u32(0);
    for (const auto& ch : tensor.channels)
        for (Eigen::Index i = 0; i < ch.values.rows(); ++i)
            for (Eigen::Index j = 0; j < ch.values.cols(); ++j) out.f32(static_cast<float>(ch.values(i, j)));
    out.save(path);
}

CollocativeTensor read_tensor_dump(const std::filesystem::path& path) {
    ByteReader in(read_file_bytes(path), path.string());
    if (!in.magic("CTEN")) fail(ErrorCode::IoError, path.string() + ": not a CTEN tensor dump");
    const auto n = static_cast<Eigen::Index>(in.u32());
    const auto m = in.u32();
    in.u32();
    std::vector<RelationMatrix> channels(m);
    for (auto& ch : channels) {
        ch.values.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) ch.values(i, j) = in.f32();
    }
    return compose_tensor(std::move(channels));
}

}  // namespace collo
