#include "collo/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "collo/error.hpp"
#include "collo/eval.hpp"
#include "collo/io.hpp"

namespace collo {

// ---- attributes -------------------------------------------------------------

Attribute Attribute::pair(Genre a, Genre b) {
    if (to_string(b) < to_string(a)) std::swap(a, b);
    return {a, b};
}

std::string Attribute::name() const {
    if (!second) return std::string(to_string(first));
    return "(" + std::string(to_string(first)) + "," + std::string(to_string(*second)) + ")";
}

Attribute Attribute::parse(std::string_view text) {
    if (!text.empty() && text.front() == '(') {
        if (text.back() != ')') fail(ErrorCode::InvalidArgument, "bad attribute '" + std::string(text) + "'");
        const auto inner = text.substr(1, text.size() - 2);
        const auto comma = inner.find(',');
        if (comma == std::string_view::npos)
            fail(ErrorCode::InvalidArgument, "bad attribute '" + std::string(text) + "'");
        return pair(parse_genre(inner.substr(0, comma)), parse_genre(inner.substr(comma + 1)));
    }
    return unary(parse_genre(text));
}

std::vector<Attribute> AttributeRanking::unary_list() const {
    std::vector<Attribute> out;
    for (const auto& r : unary) out.push_back(r.attribute);
    return out;
}

std::vector<Attribute> AttributeRanking::comparative_list() const {
    std::vector<Attribute> out;
    for (const auto& r : comparative) out.push_back(r.attribute);
    return out;
}

void RatingAccumulator::add(const Eigen::VectorXd& unary, const Eigen::MatrixXd& pairs) {
    const auto g = static_cast<Eigen::Index>(kGenreCount);
    if (unary.size() != g || pairs.rows() != g || pairs.cols() != g)
        fail(ErrorCode::ShapeMismatch, "ratings must cover all " + std::to_string(kGenreCount) + " genres");
    if (count_ == 0) {
        unary_sum_ = unary;
        pair_sum_ = pairs;
    } else {
        unary_sum_ += unary;
        pair_sum_ += pairs;
    }
    ++count_;
}

Eigen::VectorXd RatingAccumulator::mean_unary() const {
    if (count_ == 0) fail(ErrorCode::EmptyRatings, "no ratings accumulated");
    return unary_sum_ / static_cast<double>(count_);
}

Eigen::MatrixXd RatingAccumulator::mean_pairs() const {
    if (count_ == 0) fail(ErrorCode::EmptyRatings, "no ratings accumulated");
    return pair_sum_ / static_cast<double>(count_);
}

AttributeRanking rank_attributes(const Eigen::VectorXd& unary, const Eigen::MatrixXd& pairs) {
    const auto g = static_cast<Eigen::Index>(kGenreCount);
    if (unary.size() == 0 || pairs.size() == 0) fail(ErrorCode::EmptyRatings, "ratings are empty");
    if (unary.size() != g || pairs.rows() != g || pairs.cols() != g)
        fail(ErrorCode::ShapeMismatch, "ratings must cover all " + std::to_string(kGenreCount) + " genres");
    const auto& genres = all_genres();
    AttributeRanking out;
    for (std::size_t p = 0; p < kGenreCount; ++p)
        out.unary.push_back({Attribute::unary(genres[p]), unary(static_cast<Eigen::Index>(p))});
    for (std::size_t p = 0; p < kGenreCount; ++p)
        for (std::size_t q = p; q < kGenreCount; ++q) {
            const auto ip = static_cast<Eigen::Index>(p), iq = static_cast<Eigen::Index>(q);
            const double score = p == q ? pairs(ip, ip) : pairs(ip, iq) + pairs(iq, ip);
            out.comparative.push_back({Attribute::pair(genres[p], genres[q]), score});
        }
    auto order = [](const RankedAttribute& a, const RankedAttribute& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.attribute.name() < b.attribute.name();
    };
    std::sort(out.unary.begin(), out.unary.end(), order);
    std::sort(out.comparative.begin(), out.comparative.end(), order);
    return out;
}

std::string ranking_csv(const AttributeRanking& ranking) {
    std::ostringstream out;
    out << "list,rank,attribute,score\n";
    auto emit = [&](std::string_view list, const std::vector<RankedAttribute>& items) {
        for (std::size_t i = 0; i < items.size(); ++i)
            out << list << ',' << i + 1 << ",\"" << items[i].attribute.name() << "\","
                << format_double(items[i].score) << '\n';
    };
    emit("unary", ranking.unary);
    emit("comparative", ranking.comparative);
    return out.str();
}

AttributeRanking parse_ranking_csv(std::string_view text) {
    AttributeRanking out;
    std::istringstream in{std::string(text)};
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty() || line == "\r") continue;
        // The attribute field is quoted and may contain a comma.
        const auto q1 = line.find('"');
        const auto q2 = line.find('"', q1 == std::string::npos ? 0 : q1 + 1);
        if (q1 == std::string::npos || q2 == std::string::npos)
            fail(ErrorCode::ConfigParseError, "bad ranking row '" + line + "'");
        const auto head = split_csv_line(line.substr(0, q1));
        const auto tail = split_csv_line(line.substr(q2 + 1));
        if (head.size() < 2 || tail.size() < 2)
            fail(ErrorCode::ConfigParseError, "bad ranking row '" + line + "'");
        RankedAttribute r{Attribute::parse(line.substr(q1 + 1, q2 - q1 - 1)), std::stod(tail[1])};
        if (head[0] == "unary") out.unary.push_back(r);
        else if (head[0] == "comparative") out.comparative.push_back(r);
        else fail(ErrorCode::ConfigParseError, "unknown ranking list '" + head[0] + "'");
    }
    return out;
}

// ---- attribute features -----------------------------------------------------

namespace {

AttributeFeatures stats(const std::vector<double>& values) {
    AttributeFeatures f;
    if (values.empty()) return f;
    for (double v : values) f.mean += v;
    f.mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - f.mean) * (v - f.mean);
    f.std = std::sqrt(var / static_cast<double>(values.size()));
    return f;
}

}  // namespace

AttributeFeatures attribute_features(const EcgRecord& record, const WaveAnnotation& annotation,
                                     const Attribute& attribute) {
    if (annotation.beats.empty()) fail(ErrorCode::MissingGenre, "annotation of '" + record.id + "' has no beats");
    if (record.sample_rate <= 0.0) fail(ErrorCode::InvalidArgument, "record '" + record.id + "' has no sample rate");
    const double fs = record.sample_rate;
    std::vector<double> values;
    bool seen = false;
    if (!attribute.is_pair()) {
        for (const auto& beat : annotation.beats)
            if (auto it = beat.find(attribute.first); it != beat.end()) {
                seen = true;
                values.push_back(static_cast<double>(it->second.length()) / fs);
            }
    } else if (*attribute.second == attribute.first) {
        const WaveInterval* prev = nullptr;
        for (const auto& beat : annotation.beats) {
            auto it = beat.find(attribute.first);
            if (it == beat.end()) {
                prev = nullptr;
                continue;
            }
            seen = true;
            if (prev) values.push_back(static_cast<double>(it->second.onset - prev->onset) / fs);
            prev = &it->second;
        }
    } else {
        for (const auto& beat : annotation.beats) {
            auto a = beat.find(attribute.first);
            auto b = beat.find(*attribute.second);
            if (a == beat.end() || b == beat.end()) continue;
            seen = true;
            values.push_back(static_cast<double>(std::llabs(b->second.onset - a->second.onset)) / fs);
        }
    }
    if (!seen)
        fail(ErrorCode::MissingGenre, attribute.name() + " is absent from the annotation of '" + record.id + "'");
    return stats(values);
}

FeatureTable attribute_table(std::span<const EcgRecord> records, std::span<const WaveAnnotation> annotations,
                             std::span<const Attribute> attributes) {
    if (records.size() != annotations.size())
        fail(ErrorCode::LengthMismatch, "records and annotations differ in count");
    FeatureTable table;
    for (const auto& a : attributes) {
        table.columns.push_back(a.name() + ":mean");
        table.columns.push_back(a.name() + ":std");
    }
    for (std::size_t r = 0; r < records.size(); ++r) {
        std::vector<double> row;
        row.reserve(2 * attributes.size());
        for (const auto& a : attributes) {
            const auto f = attribute_features(records[r], annotations[r], a);
            row.push_back(f.mean);
            row.push_back(f.std);
        }
        table.rows.push_back(std::move(row));
        table.labels.push_back(static_cast<std::size_t>(records[r].label));
    }
    return table;
}

std::vector<std::size_t> prefix_features(std::size_t t) {
    std::vector<std::size_t> out(2 * t);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

// ---- decision tree ----------------------------------------------------------

namespace {

std::size_t class_count(const FeatureTable& table) {
    std::size_t k = 2;
    for (auto l : table.labels) k = std::max(k, l + 1);
    return k;
}

double entropy(const std::vector<std::size_t>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double h = 0.0;
    for (auto c : counts)
        if (c > 0) {
            const double p = static_cast<double>(c) / static_cast<double>(total);
            h -= p * std::log2(p);
        }
    return h;
}

double midpoint(double a, double b) {
    const double m = a + (b - a) / 2.0;
    return m >= b ? a : m;
}

void check_table(const FeatureTable& table, std::span<const std::size_t> rows, std::span<const std::size_t> features) {
    if (table.rows.empty() || rows.empty()) fail(ErrorCode::EmptyDataset, "no records to learn from");
    if (table.labels.size() != table.rows.size()) fail(ErrorCode::LengthMismatch, "labels and rows differ in count");
    for (auto r : rows)
        if (r >= table.rows.size()) fail(ErrorCode::InvalidArgument, "row index out of range");
    for (auto f : features)
        for (const auto& row : table.rows)
            if (f >= row.size()) fail(ErrorCode::InvalidArgument, "feature index " + std::to_string(f) + " out of range");
}

constexpr double kGainTolerance = 1e-12;

}  // namespace

std::optional<Split> best_split(const FeatureTable& table, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features) {
    const std::size_t k = class_count(table);
    const std::size_t n = rows.size();
    std::vector<std::size_t> total(k, 0);
    for (auto r : rows) ++total[table.labels[r]];
    const double parent = entropy(total, n);

    std::optional<Split> best;
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::vector<std::size_t> left(k), right(k);
    for (auto f : features) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return table.rows[a][f] < table.rows[b][f]; });
        std::fill(left.begin(), left.end(), 0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            ++left[table.labels[order[i]]];
            const double a = table.rows[order[i]][f], b = table.rows[order[i + 1]][f];
            if (!(a < b)) continue;
            const std::size_t nl = i + 1, nr = n - nl;
            for (std::size_t c = 0; c < k; ++c) right[c] = total[c] - left[c];
            const double gain = parent - (static_cast<double>(nl) / static_cast<double>(n)) * entropy(left, nl) -
                                (static_cast<double>(nr) / static_cast<double>(n)) * entropy(right, nr);
            if (!best || gain > best->gain + kGainTolerance) best = Split{f, midpoint(a, b), gain};
        }
    }
    return best;
}

std::size_t DecisionTree::height() const {
    if (nodes.empty()) return 0;
    std::function<std::size_t(std::size_t)> depth = [&](std::size_t i) -> std::size_t {
        const auto& nd = nodes[i];
        return nd.leaf ? 0 : 1 + std::max(depth(nd.left), depth(nd.right));
    };
    return depth(0);
}

std::size_t DecisionTree::predict(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].leaf) i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].prediction;
}

std::vector<std::size_t> DecisionTree::used_features() const {
    std::vector<std::size_t> out;
    for (const auto& nd : nodes)
        if (!nd.leaf) out.push_back(nd.feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

DecisionTree build_tree(const FeatureTable& table, std::span<const std::size_t> rows,
                        std::span<const std::size_t> features, std::size_t max_height) {
    check_table(table, rows, features);
    if (max_height == 0) fail(ErrorCode::InvalidArgument, "tree height must be >= 1");
    const std::size_t k = class_count(table);
    DecisionTree tree;
    tree.feature_names = table.columns;

    std::function<std::size_t(std::vector<std::size_t>, std::size_t)> grow =
        [&](std::vector<std::size_t> node_rows, std::size_t depth) -> std::size_t {
        const std::size_t id = tree.nodes.size();
        tree.nodes.emplace_back();
        TreeNode node;
        node.counts.assign(k, 0);
        for (auto r : node_rows) ++node.counts[table.labels[r]];
        node.prediction = static_cast<std::size_t>(
            std::max_element(node.counts.begin(), node.counts.end()) - node.counts.begin());
        const bool pure = std::count_if(node.counts.begin(), node.counts.end(), [](auto c) { return c > 0; }) <= 1;
        std::optional<Split> split;
        if (!pure && depth < max_height) split = best_split(table, node_rows, features);
        if (split) {
            std::vector<std::size_t> lo, hi;
            for (auto r : node_rows) (table.rows[r][split->feature] <= split->threshold ? lo : hi).push_back(r);
            node.leaf = false;
            node.feature = split->feature;
            node.threshold = split->threshold;
            node.left = grow(std::move(lo), depth + 1);
            node.right = grow(std::move(hi), depth + 1);
        }
        tree.nodes[id] = std::move(node);
        return id;
    };
    grow(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    return tree;
}

DecisionTree build_tree(const FeatureTable& table, std::span<const std::size_t> features, std::size_t max_height) {
    std::vector<std::size_t> rows(table.rows.size());
    std::iota(rows.begin(), rows.end(), 0);
    return build_tree(table, rows, features, max_height);
}

namespace {

std::string feature_label(const DecisionTree& tree, std::size_t f) {
    return f < tree.feature_names.size() ? tree.feature_names[f] : "x" + std::to_string(f);
}

std::string counts_label(const std::vector<std::size_t>& counts) {
    std::string s;
    for (std::size_t c = 0; c < counts.size(); ++c) s += (c ? "/" : "") + std::to_string(counts[c]);
    return s;
}

std::string node_label(const DecisionTree& tree, const TreeNode& nd) {
    if (nd.leaf) return "class " + std::to_string(nd.prediction) + " [" + counts_label(nd.counts) + "]";
    return feature_label(tree, nd.feature) + " <= " + format_double(nd.threshold);
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

}  // namespace

std::string tree_text(const DecisionTree& tree) {
    std::ostringstream out;
    std::function<void(std::size_t, std::size_t, const char*)> walk = [&](std::size_t i, std::size_t indent,
                                                                          const char* branch) {
        out << std::string(2 * indent, ' ') << branch << node_label(tree, tree.nodes[i]) << '\n';
        if (!tree.nodes[i].leaf) {
            walk(tree.nodes[i].left, indent + 1, "yes: ");
            walk(tree.nodes[i].right, indent + 1, "no: ");
        }
    };
    if (!tree.nodes.empty()) walk(0, 0, "");
    return out.str();
}

std::string tree_graph(const DecisionTree& tree) {
    std::ostringstream out;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        out << "node " << i << " \"" << node_label(tree, tree.nodes[i]) << "\"\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (!tree.nodes[i].leaf) {
            out << "edge " << i << ' ' << tree.nodes[i].left << " yes\n";
            out << "edge " << i << ' ' << tree.nodes[i].right << " no\n";
        }
    return out.str();
}

std::string tree_svg(const DecisionTree& tree) {
    constexpr int kCellW = 150, kCellH = 70, kBoxW = 140, kBoxH = 30;
    std::vector<int> column(tree.nodes.size(), 0), row(tree.nodes.size(), 0);
    int next = 0;
    std::function<void(std::size_t, int)> place = [&](std::size_t i, int depth) {
        row[i] = depth;
        if (tree.nodes[i].leaf) {
            column[i] = next++;
            return;
        }
        place(tree.nodes[i].left, depth + 1);
        place(tree.nodes[i].right, depth + 1);
        column[i] = (column[tree.nodes[i].left] + column[tree.nodes[i].right]) / 2;
    };
    if (!tree.nodes.empty()) place(0, 0);
    const int width = std::max(1, next) * kCellW;
    const int height = (static_cast<int>(tree.height()) + 1) * kCellH;
    auto cx = [&](std::size_t i) { return column[i] * kCellW + kCellW / 2; };
    auto cy = [&](std::size_t i) { return row[i] * kCellH + kCellH / 2; };
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i)
        if (!tree.nodes[i].leaf)
            for (auto c : {tree.nodes[i].left, tree.nodes[i].right})
                out << "<line x1=\"" << cx(i) << "\" y1=\"" << cy(i) << "\" x2=\"" << cx(c) << "\" y2=\"" << cy(c)
                    << "\" stroke=\"#555\"/>\n";
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        const char* fill = tree.nodes[i].leaf ? "#fde68a" : "#bfdbfe";
        out << "<rect x=\"" << cx(i) - kBoxW / 2 << "\" y=\"" << cy(i) - kBoxH / 2 << "\" width=\"" << kBoxW
            << "\" height=\"" << kBoxH << "\" fill=\"" << fill << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << cx(i) << "\" y=\"" << cy(i) + 4
            << "\" font-size=\"10\" text-anchor=\"middle\" font-family=\"monospace\">"
            << xml_escape(node_label(tree, tree.nodes[i])) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

// ---- boosted forest ---------------------------------------------------------

double RegressionTree::eval(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].leaf) i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].weight;
}

double Forest::predict_proba(std::span<const double> row) const {
    double score = 0.0;
    for (const auto& t : trees) score += t.eval(row);
    return 1.0 / (1.0 + std::exp(-(init + learning_rate * score)));
}

std::size_t Forest::predict(std::span<const double> row) const { return predict_proba(row) > 0.5 ? 1 : 0; }

namespace {

struct Newton {
    const FeatureTable& table;
    std::span<const std::size_t> features;
    const std::vector<double>& grad;  // y - p
    const std::vector<double>& hess;  // p (1 - p)
    double lambda;
    std::size_t max_depth;

    double score(double g, double h) const { return g * g / (h + lambda); }

    std::size_t grow(RegressionTree& tree, std::vector<std::size_t> rows, std::size_t depth) const {
        const std::size_t id = tree.nodes.size();
        tree.nodes.emplace_back();
        double g = 0.0, h = 0.0;
        for (auto r : rows) {
            g += grad[r];
            h += hess[r];
        }
        RegressionNode node;
        node.weight = g / (h + lambda);
        std::optional<Split> best;
        if (depth < max_depth && rows.size() >= 2) {
            const double parent = score(g, h);
            for (auto f : features) {
                std::stable_sort(rows.begin(), rows.end(),
                                 [&](std::size_t a, std::size_t b) { return table.rows[a][f] < table.rows[b][f]; });
                double gl = 0.0, hl = 0.0;
                for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
                    gl += grad[rows[i]];
                    hl += hess[rows[i]];
                    const double a = table.rows[rows[i]][f], b = table.rows[rows[i + 1]][f];
                    if (!(a < b)) continue;
                    const double gain = score(gl, hl) + score(g - gl, h - hl) - parent;
                    if (!best || gain > best->gain + kGainTolerance) best = Split{f, midpoint(a, b), gain};
                }
            }
        }
        if (best && best->gain > -kGainTolerance) {
            std::vector<std::size_t> lo, hi;
            for (auto r : rows) (table.rows[r][best->feature] <= best->threshold ? lo : hi).push_back(r);
            node.leaf = false;
            node.feature = best->feature;
            node.threshold = best->threshold;
            node.left = grow(tree, std::move(lo), depth + 1);
            node.right = grow(tree, std::move(hi), depth + 1);
        }
        tree.nodes[id] = node;
        return id;
    }
};

}  // namespace

Forest build_forest(const FeatureTable& table, std::span<const std::size_t> rows,
                    std::span<const std::size_t> features, const ForestConfig& config) {
    check_table(table, rows, features);
    for (auto r : rows)
        if (table.labels[r] > 1) fail(ErrorCode::InvalidArgument, "boosted forest needs 0/1 labels");
    if (config.learning_rate <= 0.0 || config.max_depth == 0 || config.subsample <= 0.0 || config.subsample > 1.0)
        fail(ErrorCode::InvalidArgument, "invalid forest config");

    // Canonical order so the result does not depend on the order of `rows`.
    std::vector<std::size_t> order(rows.begin(), rows.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (auto f : features)
            if (table.rows[a][f] != table.rows[b][f]) return table.rows[a][f] < table.rows[b][f];
        return table.labels[a] < table.labels[b];
    });

    Forest forest;
    forest.learning_rate = config.learning_rate;
    forest.rounds = config.rounds;
    double positives = 0.0;
    for (auto r : order) positives += static_cast<double>(table.labels[r]);
    const double prior = std::clamp(positives / static_cast<double>(order.size()), 1e-6, 1.0 - 1e-6);
    forest.init = std::log(prior / (1.0 - prior));

    std::vector<double> score(table.rows.size(), 0.0), grad(table.rows.size(), 0.0), hess(table.rows.size(), 0.0);
    std::mt19937_64 rng(config.seed);
    const auto draw = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(config.subsample * static_cast<double>(order.size()))));
    Newton newton{table, features, grad, hess, config.lambda, config.max_depth};
    for (std::size_t round = 0; round < config.rounds; ++round) {
        for (auto r : order) {
            const double p = 1.0 / (1.0 + std::exp(-(forest.init + config.learning_rate * score[r])));
            grad[r] = static_cast<double>(table.labels[r]) - p;
            hess[r] = p * (1.0 - p);
        }
        std::vector<std::size_t> sample = order;
        if (draw < order.size()) {
            std::vector<std::size_t> pos(order.size());
            std::iota(pos.begin(), pos.end(), 0);
            std::shuffle(pos.begin(), pos.end(), rng);
            pos.resize(draw);
            std::sort(pos.begin(), pos.end());
            sample.clear();
            for (auto p : pos) sample.push_back(order[p]);
        }
        RegressionTree tree;
        newton.grow(tree, std::move(sample), 0);
        for (auto r : order) score[r] += tree.eval(table.rows[r]);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

Forest build_forest(const FeatureTable& table, std::span<const std::size_t> features, const ForestConfig& config) {
    std::vector<std::size_t> rows(table.rows.size());
    std::iota(rows.begin(), rows.end(), 0);
    return build_forest(table, rows, features, config);
}

// ---- attribute selection ----------------------------------------------------

std::string_view to_string(Evaluator e) { return e == Evaluator::accuracy ? "accuracy" : "f1"; }

Evaluator parse_evaluator(std::string_view text) {
    if (text == "accuracy") return Evaluator::accuracy;
    if (text == "f1") return Evaluator::f1;
    fail(ErrorCode::InvalidArgument, "unknown evaluator '" + std::string(text) + "'");
}

std::string_view to_string(Learner l) { return l == Learner::tree ? "tree" : "forest"; }

Learner parse_learner(std::string_view text) {
    if (text == "tree") return Learner::tree;
    if (text == "forest") return Learner::forest;
    fail(ErrorCode::InvalidArgument, "unknown learner '" + std::string(text) + "'");
}

double score_cell(const FeatureTable& table, std::span<const std::size_t> fit_rows,
                  std::span<const std::size_t> score_rows, std::size_t t, std::size_t h,
                  const SelectionConfig& config) {
    const auto features = prefix_features(t);
    std::vector<std::size_t> predictions, labels;
    if (config.learner == Learner::tree) {
        const auto tree = build_tree(table, fit_rows, features, h);
        for (auto r : score_rows) predictions.push_back(tree.predict(table.rows[r]));
    } else {
        ForestConfig fc = config.forest;
        fc.max_depth = h;
        const auto forest = build_forest(table, fit_rows, features, fc);
        for (auto r : score_rows) predictions.push_back(forest.predict(table.rows[r]));
    }
    for (auto r : score_rows) labels.push_back(table.labels[r]);
    const auto m = compute_metrics(predictions, labels);
    return config.evaluator == Evaluator::accuracy ? m.accuracy : m.f1;
}

SelectionResult select_attributes(std::span<const Attribute> ranking, const FeatureTable& table,
                                  std::span<const std::size_t> rows, const SelectionConfig& config) {
    if (config.t_max == 0 || config.t_max > ranking.size() || config.h_max == 0)
        fail(ErrorCode::InvalidBounds, "need 1 <= t_max <= " + std::to_string(ranking.size()) + " and h_max >= 1");
    if (table.columns.size() != 2 * ranking.size())
        fail(ErrorCode::ShapeMismatch, "feature table does not match the ranking");
    if (rows.empty()) fail(ErrorCode::EmptyDataset, "no records for attribute selection");

    std::vector<std::size_t> row_labels;
    for (auto r : rows) row_labels.push_back(table.labels[r]);
    auto [fit_pos, score_pos] = stratified_split(row_labels, config.fit_fraction, config.seed);
    SelectionResult result;
    for (auto p : fit_pos) result.fit_rows.push_back(rows[p]);
    for (auto p : score_pos) result.score_rows.push_back(rows[p]);
    // Too few records to hold any out: score on the fitting rows.
    if (result.score_rows.empty()) result.score_rows = result.fit_rows;
    if (result.fit_rows.empty()) result.fit_rows = result.score_rows;

    result.grid.assign(config.t_max, std::vector<double>(config.h_max, 0.0));
    bool have = false;
    for (std::size_t t = 1; t <= config.t_max; ++t)
        for (std::size_t h = 1; h <= config.h_max; ++h) {
            const double s = score_cell(table, result.fit_rows, result.score_rows, t, h, config);
            result.grid[t - 1][h - 1] = s;
            if (!have || s > result.score) {
                have = true;
                result.score = s;
                result.t = t;
                result.h = h;
            }
        }
    result.attributes.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(result.t));
    return result;
}

SelectionResult select_attributes(std::span<const Attribute> ranking, const FeatureTable& table,
                                  const SelectionConfig& config) {
    std::vector<std::size_t> rows(table.rows.size());
    std::iota(rows.begin(), rows.end(), 0);
    return select_attributes(ranking, table, rows, config);
}

}  // namespace collo
