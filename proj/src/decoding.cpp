#include "collo/decoding.hpp"

#include <algorithm>

#include "collo/error.hpp"

namespace collo {

MembershipMatrix membership_matrix(const WaveAnnotation& annotation, std::size_t segments, std::size_t window,
                                   std::span<const Genre> genres) {
    MembershipMatrix out;
    out.genres.assign(genres.begin(), genres.end());
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(segments), static_cast<Eigen::Index>(genres.size()));
    const auto w = static_cast<std::int64_t>(window);
    for (std::size_t p = 0; p < genres.size(); ++p)
        for (const auto& beat : annotation.beats) {
            const auto it = beat.find(genres[p]);
            if (it == beat.end() || it->second.length() <= 0) continue;
            const auto& span = it->second;
            const auto first = std::max<std::int64_t>(0, span.onset / w);
            const auto last = std::min<std::int64_t>(static_cast<std::int64_t>(segments) - 1, (span.offset - 1) / w);
            for (std::int64_t i = first; i <= last; ++i) {
                const std::int64_t lo = std::max(span.onset, i * w);
                const std::int64_t hi = std::min(span.offset, (i + 1) * w);
                const std::int64_t overlap = hi - lo;
                if (overlap <= 0) continue;
                if (2 * overlap >= w || 2 * overlap >= span.length())
                    out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = 1.0;
            }
        }
    return out;
}

MembershipMatrix membership_matrix(const WaveAnnotation& annotation, const SegmentSeries& series,
                                   std::span<const Genre> genres) {
    if (!annotation.record_id.empty() && !series.record_id.empty() && annotation.record_id != series.record_id)
        fail(ErrorCode::RecordMismatch,
             "annotation of '" + annotation.record_id + "' applied to segments of '" + series.record_id + "'");
    return membership_matrix(annotation, series.n(), series.window, genres);
}

Eigen::VectorXd unary_rating(const Eigen::MatrixXd& saliency, const MembershipMatrix& membership) {
    const auto n = saliency.rows();
    if (saliency.cols() != n || membership.values.rows() != n)
        fail(ErrorCode::ShapeMismatch, "saliency map and membership matrix disagree on the segment count");
    const Eigen::VectorXd votes =
        (saliency.rowwise().sum() + saliency.colwise().sum().transpose()) / (2.0 * static_cast<double>(n));
    return membership.values.transpose() * votes / static_cast<double>(n);
}

Eigen::MatrixXd pairwise_rating(const Eigen::MatrixXd& saliency, const MembershipMatrix& membership) {
    const auto n = saliency.rows();
    if (saliency.cols() != n || membership.values.rows() != n)
        fail(ErrorCode::ShapeMismatch, "saliency map and membership matrix disagree on the segment count");
    return membership.values.transpose() * saliency * membership.values;
}

}  // namespace collo
