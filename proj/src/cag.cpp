#include "collo/cag.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "collo/error.hpp"

namespace collo::cag {

namespace {

double phase(const CagParams& p, std::size_t offset, std::size_t m) {
    return 2.0 * std::numbers::pi * p.period * static_cast<double>(offset) / static_cast<double>(m) + p.beta;
}

}  // namespace

double raw_value(const CagParams& params, std::size_t offset, std::size_t m) {
    return params.alpha * std::cos(phase(params, offset, m)) + params.gamma;
}

AttentionMask build_mask(const CagParams& params, std::size_t m) {
    if (m == 0) fail(ErrorCode::InvalidArgument, "mask size must be >= 1");
    AttentionMask mask;
    mask.profile.resize(m);
    mask.clamp.resize(m);
    for (std::size_t d = 0; d < m; ++d) {
        const double raw = raw_value(params, d, m);
        if (raw < 0.0) {
            mask.profile[d] = 0.0;
            mask.clamp[d] = ClampState::low;
        } else if (raw > 1.0) {
            mask.profile[d] = 1.0;
            mask.clamp[d] = ClampState::high;
        } else {
            mask.profile[d] = raw;
            mask.clamp[d] = ClampState::interior;
        }
    }
    const auto size = static_cast<Eigen::Index>(m);
    mask.values.resize(size, size);
    for (Eigen::Index i = 0; i < size; ++i)
        for (Eigen::Index j = 0; j < size; ++j) mask.values(i, j) = mask.profile[static_cast<std::size_t>(std::abs(i - j))];
    return mask;
}

void regulate(std::span<const double> feature_map, std::size_t channels, const AttentionMask& mask,
              std::span<double> out) {
    const std::size_t m = mask.size();
    if (feature_map.size() != channels * m * m || out.size() != feature_map.size())
        fail(ErrorCode::ShapeMismatch, "feature map does not match a " + std::to_string(m) + "x" + std::to_string(m) +
                                           " mask with " + std::to_string(channels) + " channels");
    std::vector<double> gain(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) gain[i * m + j] = mask.profile[i > j ? i - j : j - i] + 1.0;
    for (std::size_t k = 0; k < channels; ++k) {
        const double* src = feature_map.data() + k * m * m;
        double* dst = out.data() + k * m * m;
        for (std::size_t c = 0; c < m * m; ++c) dst[c] = src[c] * gain[c];
    }
}

std::vector<double> regulate(std::span<const double> feature_map, std::size_t channels, const AttentionMask& mask) {
    std::vector<double> out(feature_map.size());
    regulate(feature_map, channels, mask, out);
    return out;
}

CagGradients param_gradients_by_offset(std::span<const double> offset_upstream, const CagParams& params,
                                       const AttentionMask& mask) {
    const std::size_t m = mask.size();
    if (offset_upstream.size() != m) fail(ErrorCode::ShapeMismatch, "offset upstream length differs from mask size");
    CagGradients g;
    for (std::size_t d = 0; d < m; ++d) {
        if (mask.clamp[d] != ClampState::interior) continue;
        const double up = offset_upstream[d];
        const double ph = phase(params, d, m);
        const double c = std::cos(ph);
        const double s = std::sin(ph);
        g.alpha += up * c;
        g.beta -= up * params.alpha * s;
        g.gamma += up;
        g.period -= up * params.alpha * s * 2.0 * std::numbers::pi * static_cast<double>(d) / static_cast<double>(m);
    }
    return g;
}

CagGradients param_gradients(const Eigen::MatrixXd& upstream, const CagParams& params, const AttentionMask& mask) {
    const auto m = static_cast<Eigen::Index>(mask.size());
    if (upstream.rows() != m || upstream.cols() != m)
        fail(ErrorCode::ShapeMismatch, "upstream gradient must be " + std::to_string(m) + "x" + std::to_string(m));
    std::vector<double> by_offset(mask.size(), 0.0);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) by_offset[static_cast<std::size_t>(std::abs(i - j))] += upstream(i, j);
    return param_gradients_by_offset(by_offset, params, mask);
}

std::size_t stripe_spacing(const AttentionMask& mask) {
    const std::size_t m = mask.size();
    if (m < 4) return 0;
    // Pearson correlation between the profile and its lagged copy over the
    // overlap; an exact integer period correlates to 1.
    const auto& p = mask.profile;
    std::vector<double> r(m - 2, 0.0);
    for (std::size_t lag = 0; lag + 2 < m; ++lag) {
        const std::size_t count = m - lag;
        double ma = 0.0, mb = 0.0;
        for (std::size_t d = 0; d < count; ++d) ma += p[d], mb += p[d + lag];
        ma /= static_cast<double>(count);
        mb /= static_cast<double>(count);
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (std::size_t d = 0; d < count; ++d) {
            const double a = p[d] - ma, b = p[d + lag] - mb;
            ab += a * b, aa += a * a, bb += b * b;
        }
        r[lag] = aa > 0.0 && bb > 0.0 ? ab / std::sqrt(aa * bb) : 0.0;
    }
    for (std::size_t lag = 1; lag + 1 < r.size(); ++lag)
        if (r[lag] > r[lag - 1] && r[lag] >= r[lag + 1] && r[lag] > 0.0) return lag;
    return 0;
}

void clamp_period(CagParams& params, std::size_t m) {
    const double hi = std::max(0.5, static_cast<double>(m) / 2.0);
    params.period = std::clamp(params.period, 0.5, hi);
}

}  // namespace collo::cag
