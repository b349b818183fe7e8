#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace collo::cag {

/// Parameters of one Coached Attention Gate: a cosine stripe pattern laid
/// along the diagonal of an m x m feature map,
///   raw(i, j) = alpha * cos(2 pi period |i - j| / m + beta) + gamma.
struct CagParams {
    double alpha = 0.25;
    double beta = 0.0;
    double gamma = 0.5;
    double period = 12.0;  // stripes across the full diagonal span

    bool operator==(const CagParams&) const = default;
};

enum class ClampState : unsigned char { interior, low, high };

/// m x m gate values clamped to [0, 1]. Since every cell depends only on
/// |i - j|, the per-offset profile and clamp state are stored alongside.
struct AttentionMask {
    Eigen::MatrixXd values;
    std::vector<double> profile;        // value at offset d = |i - j|
    std::vector<ClampState> clamp;      // clamp state at offset d

    std::size_t size() const { return profile.size(); }
};

struct CagGradients {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double period = 0.0;
};

double raw_value(const CagParams& params, std::size_t offset, std::size_t m);

AttentionMask build_mask(const CagParams& params, std::size_t m);

/// out[k] = F[k] * (mask + 1) for every channel of a channel-major m x m x Z
/// map; the input may alias the output.
void regulate(std::span<const double> feature_map, std::size_t channels, const AttentionMask& mask,
              std::span<double> out);
std::vector<double> regulate(std::span<const double> feature_map, std::size_t channels, const AttentionMask& mask);

/// Chain rule from dY/dOmega (m x m) to (alpha, beta, gamma, period); cells
/// whose raw value was clamped contribute nothing.
CagGradients param_gradients(const Eigen::MatrixXd& upstream, const CagParams& params, const AttentionMask& mask);

/// Same as above with the upstream already summed per diagonal offset.
CagGradients param_gradients_by_offset(std::span<const double> offset_upstream, const CagParams& params,
                                       const AttentionMask& mask);

/// First local maximum at positive lag of the lagged self-correlation of the mask's
/// offset profile, i.e. the stripe spacing in cells. Returns 0 if none.
std::size_t stripe_spacing(const AttentionMask& mask);

/// Keeps period inside [0.5, m / 2] (and at least 0.5 for tiny maps).
void clamp_period(CagParams& params, std::size_t m);

}  // namespace collo::cag
