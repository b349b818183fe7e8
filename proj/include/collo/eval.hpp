#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace collo {

/// Binary classification metrics. All rates are percentages; recall,
/// precision and f1 are macro-averaged over the two classes, tpr/tnr and the
/// positive_* fields refer to the positive class.
struct Metrics {
    double accuracy = 0.0;
    double f1 = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double tpr = 0.0;
    double tnr = 0.0;
    double positive_precision = 0.0;
    double positive_recall = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                        std::size_t positive_class = 1);
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

/// Stratified, seeded k-fold assignment: returns the test indices of every
/// fold. Fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> labels, std::size_t k,
                                                 std::uint64_t seed);

/// Stratified seeded split; returns (first, second) where first holds about
/// `fraction` of every class. Indices refer to positions in `labels`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::size_t> labels,
                                                                               double fraction, std::uint64_t seed);

struct CvResult {
    std::vector<Metrics> folds;
    Metrics mean;  // field-wise mean (counts summed)
    Metrics stddev;  // field-wise population std (counts zero)
};

using FoldTrainer = std::function<Metrics(std::size_t fold, std::span<const std::size_t> train,
                                          std::span<const std::size_t> test)>;

CvResult cross_validate(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed,
                        const FoldTrainer& trainer);
CvResult summarize(std::vector<Metrics> folds);

/// Header row, one row per fold, then "mean" and "std" rows.
std::string metrics_csv(const CvResult& result);

}  // namespace collo
