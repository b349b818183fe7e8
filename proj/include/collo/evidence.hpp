#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "collo/signal.hpp"

namespace collo {

/// A wave genre, or an unordered pair of genres (first <= second by name).
struct Attribute {
    Genre first = Genre::TP;
    std::optional<Genre> second;

    static Attribute unary(Genre g) { return {g, std::nullopt}; }
    static Attribute pair(Genre a, Genre b);

    bool is_pair() const { return second.has_value(); }
    std::string name() const;  // "ST" or "(ST,TP)"
    static Attribute parse(std::string_view text);

    bool operator==(const Attribute&) const = default;
};

struct RankedAttribute {
    Attribute attribute;
    double score = 0.0;
};

struct AttributeRanking {
    std::vector<RankedAttribute> unary;        // 15 entries
    std::vector<RankedAttribute> comparative;  // 120 entries

    std::vector<Attribute> unary_list() const;
    std::vector<Attribute> comparative_list() const;
};

/// Running mean of per-record unary vectors and pair matrices, both indexed
/// by all_genres() order.
class RatingAccumulator {
public:
    void add(const Eigen::VectorXd& unary, const Eigen::MatrixXd& pairs);
    std::size_t count() const { return count_; }
    Eigen::VectorXd mean_unary() const;
    Eigen::MatrixXd mean_pairs() const;

private:
    Eigen::VectorXd unary_sum_;
    Eigen::MatrixXd pair_sum_;
    std::size_t count_ = 0;
};

/// Sorts genres by unary rating and genre pairs by W(p,q) + W(q,p) (W(p,p)
/// for self-pairs), descending; ties go to the lexicographically smaller name.
AttributeRanking rank_attributes(const Eigen::VectorXd& unary, const Eigen::MatrixXd& pairs);

/// Columns: list, rank, attribute, score.
std::string ranking_csv(const AttributeRanking& ranking);
AttributeRanking parse_ranking_csv(std::string_view text);

struct AttributeFeatures {
    double mean = 0.0;
    double std = 0.0;
};

/// Unary: genre durations in seconds over the beats. Pair: |onset(b) -
/// onset(a)| within each beat; a self-pair uses the onsets of the genre in
/// consecutive beats. Population standard deviation.
AttributeFeatures attribute_features(const EcgRecord& record, const WaveAnnotation& annotation,
                                     const Attribute& attribute);

/// Two columns ("<name>:mean", "<name>:std") per attribute, one row per record.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;

    std::size_t size() const { return rows.size(); }
};

FeatureTable attribute_table(std::span<const EcgRecord> records, std::span<const WaveAnnotation> annotations,
                             std::span<const Attribute> attributes);

/// Column indices for the first t attributes of a table built by attribute_table.
std::vector<std::size_t> prefix_features(std::size_t t);

inline constexpr std::size_t kUnlimitedHeight = std::numeric_limits<std::size_t>::max();

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;  // value <= threshold goes left
    double gain = 0.0;
};

/// Highest-information-gain split over midpoint thresholds of the given
/// features, or nothing when every feature is constant on `rows`.
std::optional<Split> best_split(const FeatureTable& table, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features);

struct TreeNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t prediction = 0;
    std::vector<std::size_t> counts;  // per class
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::vector<std::string> feature_names;

    std::size_t height() const;
    std::size_t predict(std::span<const double> row) const;
    std::vector<std::size_t> used_features() const;
};

DecisionTree build_tree(const FeatureTable& table, std::span<const std::size_t> rows,
                        std::span<const std::size_t> features, std::size_t max_height);
DecisionTree build_tree(const FeatureTable& table, std::span<const std::size_t> features, std::size_t max_height);

std::string tree_text(const DecisionTree& tree);
/// One "node <id> <label>" line per node and one "edge <from> <to> <yes|no>" per edge.
std::string tree_graph(const DecisionTree& tree);
std::string tree_svg(const DecisionTree& tree);

struct ForestConfig {
    std::size_t rounds = 50;
    double learning_rate = 0.1;
    std::size_t max_depth = 3;
    double lambda = 1.0;     // L2 penalty on leaf weights
    double subsample = 1.0;  // row fraction drawn per round
    std::uint64_t seed = 0;
};

struct RegressionNode {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    double weight = 0.0;
};

struct RegressionTree {
    std::vector<RegressionNode> nodes;
    double eval(std::span<const double> row) const;
};

struct Forest {
    std::vector<RegressionTree> trees;
    double learning_rate = 0.1;
    std::size_t rounds = 0;
    double init = 0.0;  // log-odds of the class prior

    double predict_proba(std::span<const double> row) const;  // P(class 1)
    std::size_t predict(std::span<const double> row) const;
};

/// Gradient boosting on logistic loss with Newton leaf values. Labels must be 0/1.
Forest build_forest(const FeatureTable& table, std::span<const std::size_t> rows,
                    std::span<const std::size_t> features, const ForestConfig& config);
Forest build_forest(const FeatureTable& table, std::span<const std::size_t> features, const ForestConfig& config);

enum class Evaluator { accuracy, f1 };
std::string_view to_string(Evaluator e);
Evaluator parse_evaluator(std::string_view text);

enum class Learner { tree, forest };
std::string_view to_string(Learner l);
Learner parse_learner(std::string_view text);

struct SelectionConfig {
    std::size_t t_max = 10;
    std::size_t h_max = 6;
    Evaluator evaluator = Evaluator::accuracy;
    Learner learner = Learner::tree;
    ForestConfig forest{};  // max_depth is replaced by h
    double fit_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct SelectionResult {
    std::size_t t = 0;
    std::size_t h = 0;
    double score = 0.0;  // percent
    std::vector<Attribute> attributes;
    std::vector<std::vector<double>> grid;  // grid[t-1][h-1]
    std::vector<std::size_t> fit_rows;
    std::vector<std::size_t> score_rows;
};

/// Scores every (t, h) cell on a seeded stratified split of `rows` and keeps
/// the best; ties go to the smaller t, then the smaller h. `table` must come
/// from attribute_table over `ranking`.
SelectionResult select_attributes(std::span<const Attribute> ranking, const FeatureTable& table,
                                  std::span<const std::size_t> rows, const SelectionConfig& config);
SelectionResult select_attributes(std::span<const Attribute> ranking, const FeatureTable& table,
                                  const SelectionConfig& config);

/// rho of one learner on `score_rows` after fitting on `fit_rows`.
double score_cell(const FeatureTable& table, std::span<const std::size_t> fit_rows,
                  std::span<const std::size_t> score_rows, std::size_t t, std::size_t h,
                  const SelectionConfig& config);

}  // namespace collo
