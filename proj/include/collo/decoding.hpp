#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "collo/signal.hpp"

namespace collo {

struct MembershipMatrix {
    Eigen::MatrixXd values;  // |S| x |W|, entries 0 or 1
    std::vector<Genre> genres;

    std::size_t segments() const { return static_cast<std::size_t>(values.rows()); }
};

/// M(i, p) = 1 when segment i and the instances of genre p overlap by at
/// least half of the segment, or by at least half of one instance.
MembershipMatrix membership_matrix(const WaveAnnotation& annotation, const SegmentSeries& series,
                                   std::span<const Genre> genres);

/// Same rule from explicit segment spans; used when no SegmentSeries exists.
MembershipMatrix membership_matrix(const WaveAnnotation& annotation, std::size_t segments, std::size_t window,
                                   std::span<const Genre> genres);

/// s_W = (1/|S|) M^T (S 1 + S^T 1) / (2 |S|).
Eigen::VectorXd unary_rating(const Eigen::MatrixXd& saliency, const MembershipMatrix& membership);

/// W(p, q) = m_p^T S m_q.
Eigen::MatrixXd pairwise_rating(const Eigen::MatrixXd& saliency, const MembershipMatrix& membership);

}  // namespace collo
