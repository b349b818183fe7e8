#pragma once

// Reference computations shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "collo/evidence.hpp"
#include "collo/network.hpp"

namespace collo::oracle {

struct GradientCheck {
    double weights = 0.0;  // worst relative error over conv, bias and FC parameters
    double cag = 0.0;      // worst relative error over (alpha, beta, gamma, period)
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Four-point central finite differences of the cross-entropy against
/// backward() on a freshly initialised model with random inputs in [0, 1].
/// Weight steps stay small to avoid ReLU kinks; CAG steps are larger to keep
/// rounding in the loss below the CAG tolerance.
inline GradientCheck gradient_check(ModelConfig config, std::uint64_t seed, double step = 1e-5,
                                    double cag_step = 1e-4) {
    config.seed = seed;
    std::mt19937_64 rng(seed * 7919 + 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    // Unclamped regime: alpha <= gamma and alpha + gamma <= 1.
    config.cag_init = {0.1 + 0.3 * u(rng), 2.0 * u(rng), 0.5, 0.5 + 3.0 * u(rng)};
    const Model model(config);
    std::vector<double> input(config.input_channels * config.input_size * config.input_size);
    for (double& v : input) v = u(rng);
    const std::size_t target = seed % config.num_classes;
    const auto grads = backward(forward(model, input), model, target);

    std::vector<bool> is_cag(model.parameters().size(), false);
    for (const auto& b : model.layout())
        for (std::size_t k = 0; k < 4; ++k) is_cag[b.cag + k] = true;

    const auto loss_at = [&](std::size_t p, double delta) {
        Model probe = model;
        probe.mutable_parameters()[p] += delta;
        return cross_entropy(forward(probe, input), target);
    };
    GradientCheck out;
    for (std::size_t p = 0; p < model.parameters().size(); ++p) {
        const double h = is_cag[p] ? cag_step : step;
        const double numeric =
            (-loss_at(p, 2 * h) + 8 * loss_at(p, h) - 8 * loss_at(p, -h) + loss_at(p, -2 * h)) / (12 * h);
        const double err = relative_error(grads.parameters[p], numeric);
        double& slot = is_cag[p] ? out.cag : out.weights;
        slot = std::max(slot, err);
    }
    return out;
}

/// The tiny model used for gradient checks: two blocks on an 8x8x7 input.
inline ModelConfig tiny_config() {
    ModelConfig c;
    c.input_size = 8;
    c.input_channels = 7;
    c.widths = {3, 4};
    return c;
}

inline double entropy(std::size_t zeros, std::size_t ones) {
    const double n = static_cast<double>(zeros + ones);
    double h = 0.0;
    for (std::size_t c : {zeros, ones})
        if (c > 0) h -= static_cast<double>(c) / n * std::log2(static_cast<double>(c) / n);
    return h;
}

struct BruteSplit {
    bool found = false;
    double gain = 0.0;
    std::vector<std::pair<std::size_t, double>> best;  // every (feature, threshold) reaching `gain`
};

/// Enumerates every feature and every midpoint between distinct values and
/// scores it by counting labels on each side (binary labels).
inline BruteSplit brute_force_split(const FeatureTable& table, const std::vector<std::size_t>& rows,
                                    const std::vector<std::size_t>& features) {
    std::size_t ones = 0;
    for (auto r : rows) ones += table.labels[r];
    const double parent = entropy(rows.size() - ones, ones);
    BruteSplit out;
    for (auto f : features) {
        std::vector<double> values;
        for (auto r : rows) values.push_back(table.rows[r][f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const double threshold = values[k] + (values[k + 1] - values[k]) / 2.0;
            std::size_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (auto r : rows) {
                const bool left = table.rows[r][f] <= threshold;
                const bool one = table.labels[r] == 1;
                (left ? (one ? l1 : l0) : (one ? r1 : r0)) += 1;
            }
            const double n = static_cast<double>(rows.size());
            const double gain = parent - static_cast<double>(l0 + l1) / n * entropy(l0, l1) -
                                static_cast<double>(r0 + r1) / n * entropy(r0, r1);
            if (!out.found || gain > out.gain + 1e-9) {
                out.found = true;
                out.gain = gain;
                out.best.clear();
            }
            if (std::abs(gain - out.gain) <= 1e-9) out.best.emplace_back(f, threshold);
        }
    }
    return out;
}

/// Scores every (t, h) cell by refitting on `fit` and counting hits on
/// `score` directly, then picks the first strict maximum in t-major order.
struct GridOracle {
    std::vector<std::vector<double>> grid;
    std::size_t t = 0, h = 0;
    double score = -1.0;
};

inline GridOracle reevaluate_grid(const FeatureTable& table, const std::vector<std::size_t>& fit,
                                  const std::vector<std::size_t>& score, std::size_t t_max, std::size_t h_max) {
    GridOracle out;
    out.grid.assign(t_max, std::vector<double>(h_max, 0.0));
    for (std::size_t t = 1; t <= t_max; ++t)
        for (std::size_t h = 1; h <= h_max; ++h) {
            std::vector<std::size_t> features;
            for (std::size_t c = 0; c < 2 * t; ++c) features.push_back(c);
            const auto tree = build_tree(table, fit, features, h);
            std::size_t hits = 0;
            for (auto r : score) hits += tree.predict(table.rows[r]) == table.labels[r];
            const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(score.size());
            out.grid[t - 1][h - 1] = acc;
            if (acc > out.score) out.score = acc, out.t = t, out.h = h;
        }
    return out;
}

}  // namespace collo::oracle
