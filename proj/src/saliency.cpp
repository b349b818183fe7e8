#include "collo/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

Eigen::MatrixXd layer_cam(std::span<const double> activations, std::span<const double> gradients,
                          std::size_t channels, std::size_t m) {
    if (activations.size() != channels * m * m || gradients.size() != activations.size())
        fail(ErrorCode::ShapeMismatch, "activation and gradient maps must both be " + std::to_string(channels) + "x" +
                                           std::to_string(m) + "x" + std::to_string(m));
    const auto size = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd cam = Eigen::MatrixXd::Zero(size, size);
    for (std::size_t k = 0; k < channels; ++k) {
        double weight = 0.0;
        for (std::size_t c = 0; c < m * m; ++c) weight += gradients[k * m * m + c];
        weight /= static_cast<double>(m * m);
        if (weight == 0.0) continue;
        for (Eigen::Index i = 0; i < size; ++i)
            for (Eigen::Index j = 0; j < size; ++j)
                cam(i, j) += weight * activations[k * m * m + static_cast<std::size_t>(i * size + j)];
    }
    return cam.cwiseMax(0.0);
}

Eigen::MatrixXd resize_bilinear(const Eigen::MatrixXd& map, std::size_t target) {
    const auto src = map.rows();
    const auto dst = static_cast<Eigen::Index>(target);
    if (src == dst) return map;
    Eigen::MatrixXd out(dst, dst);
    const double scale = static_cast<double>(src) / static_cast<double>(dst);
    auto coord = [&](Eigen::Index d, Eigen::Index& lo, Eigen::Index& hi, double& frac) {
        double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        lo = static_cast<Eigen::Index>(std::floor(s));
        hi = std::min(lo + 1, src - 1);
        frac = s - static_cast<double>(lo);
    };
    for (Eigen::Index i = 0; i < dst; ++i) {
        Eigen::Index y0, y1;
        double fy;
        coord(i, y0, y1, fy);
        for (Eigen::Index j = 0; j < dst; ++j) {
            Eigen::Index x0, x1;
            double fx;
            coord(j, x0, x1, fx);
            const double top = map(y0, x0) * (1.0 - fx) + map(y0, x1) * fx;
            const double bottom = map(y1, x0) * (1.0 - fx) + map(y1, x1) * fx;
            out(i, j) = top * (1.0 - fy) + bottom * fy;
        }
    }
    return out;
}

SaliencyMap fuse_maps(const std::vector<Eigen::MatrixXd>& maps, std::size_t target) {
    if (maps.empty()) fail(ErrorCode::EmptyMapList, "no block maps to fuse");
    const auto size = static_cast<Eigen::Index>(target);
    SaliencyMap out;
    out.values = Eigen::MatrixXd::Zero(size, size);
    for (const auto& map : maps) {
        if (map.rows() != map.cols() || map.rows() == 0) fail(ErrorCode::ShapeMismatch, "block maps must be square");
        const double lo = map.minCoeff();
        const double hi = map.maxCoeff();
        out.block_ranges.emplace_back(lo, hi);
        Eigen::MatrixXd normalized = hi > lo ? Eigen::MatrixXd((map.array() - lo) / (hi - lo))
                                             : Eigen::MatrixXd::Zero(map.rows(), map.cols());
        out.values += resize_bilinear(normalized, target);
    }
    out.values /= static_cast<double>(maps.size());
    out.values = out.values.cwiseMax(0.0).cwiseMin(1.0);
    return out;
}

SaliencyMap compute_saliency(const Model& model, std::span<const double> input, std::size_t class_id) {
    const auto& cfg = model.config();
    if (class_id >= cfg.num_classes) fail(ErrorCode::InvalidArgument, "class id out of range");
    const auto cache = forward(model, input);
    std::vector<double> onehot(cfg.num_classes, 0.0);
    onehot[class_id] = 1.0;
    const auto grads = backprop(cache, model, onehot);
    std::vector<Eigen::MatrixXd> maps;
    for (std::size_t l = 0; l < cfg.blocks(); ++l) {
        const auto& b = model.layout()[l];
        maps.push_back(layer_cam(cache.blocks[l].regulated, grads.regulated[l], b.out_channels, b.size));
    }
    auto fused = fuse_maps(maps, cfg.input_size);
    fused.class_id = class_id;
    return fused;
}

std::vector<double> diagonal_offset_profile(const Eigen::MatrixXd& map) {
    const auto n = map.rows();
    std::vector<double> profile(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index d = 0; d < n; ++d) {
        double s = 0.0;
        for (Eigen::Index i = 0; i + d < n; ++i) s += map(i, i + d) + map(i + d, i);
        profile[static_cast<std::size_t>(d)] = s / (2.0 * static_cast<double>(n - d));
    }
    return profile;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
    std::ostringstream out;
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) out << (j ? "," : "") << "c" << j;
    out << '\n';
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) out << (j ? "," : "") << format_double(matrix(i, j));
        out << '\n';
    }
    write_text_file(path, out.str());
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<double> row;
        for (const auto& f : split_csv_line(line)) row.push_back(std::stod(f));
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != m.cols()) fail(ErrorCode::IoError, path.string() + ": ragged CSV");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

void write_heatmap_svg(const std::filesystem::path& path, const Eigen::MatrixXd& matrix, const std::string& title) {
    constexpr int cell = 8;
    const auto rows = matrix.rows();
    const auto cols = matrix.cols();
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << cols * cell << "\" height=\"" << rows * cell + 20
        << "\">\n<text x=\"2\" y=\"14\" font-family=\"monospace\" font-size=\"12\">" << title << "</text>\n";
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double v = std::clamp(matrix(i, j), 0.0, 1.0);
            // Dark blue -> yellow ramp.
            const int r = static_cast<int>(std::lround(255.0 * v));
            const int g = static_cast<int>(std::lround(40.0 + 200.0 * v));
            const int b = static_cast<int>(std::lround(120.0 * (1.0 - v)));
            out << "<rect x=\"" << j * cell << "\" y=\"" << 20 + i * cell << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
        }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

}  // namespace collo
