#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <vector>

#include "collo/network.hpp"

namespace collo {

struct SaliencyMap {
    Eigen::MatrixXd values;  // n x n, every entry in [0, 1]
    std::size_t class_id = 0;
    // Per-block (min, max) of the raw class-activation maps before fusion.
    std::vector<std::pair<double, double>> block_ranges;
};

/// Grad-CAM on one block: channel weights are the spatial means of the
/// gradients; the map is ReLU of the weighted channel sum. Both inputs are
/// channel-major m x m x channels.
Eigen::MatrixXd layer_cam(std::span<const double> activations, std::span<const double> gradients,
                          std::size_t channels, std::size_t m);

/// Bilinear resize with half-pixel centres (identity when sizes agree).
Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& map, std::size_t target);

/// Min-max normalise each map to [0, 1] (constant maps become 0), resize to
/// target x target and average.
SaliencyMap fuse_maps(const std::vector<Eigen::MatrixXd>& maps, std::size_t target);

/// Forward + backward from the class-c logit, one Grad-CAM per block, fused
/// at the model's input resolution.
SaliencyMap compute_saliency(const Model& model, std::span<const double> input, std::size_t class_id);

/// Mean saliency per diagonal offset d = |i - j|.
std::vector<double> diagonal_offset_profile(const Eigen::MatrixXd& map);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);
/// Static SVG heatmap, one rect per cell, values expected in [0, 1].
void write_heatmap_svg(const std::filesystem::path& path, const Eigen::MatrixXd& matrix, const std::string& title);

}  // namespace collo
