#include "collo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "collo/error.hpp"
#include "collo/io.hpp"

namespace collo {

namespace {

double pct(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double a, double b) { return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0; }

std::vector<std::size_t> stratified_order(std::span<const std::size_t> labels, std::uint64_t seed) {
    const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order;
    order.reserve(labels.size());
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        order.insert(order.end(), members.begin(), members.end());
    }
    return order;
}

}  // namespace

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tn = tn;
    m.accuracy = pct(tp + tn, tp + fp + fn + tn);
    m.positive_precision = pct(tp, tp + fp);
    m.positive_recall = pct(tp, tp + fn);
    const double negative_precision = pct(tn, tn + fn);
    const double negative_recall = pct(tn, tn + fp);
    m.tpr = m.positive_recall;
    m.tnr = negative_recall;
    m.precision = 0.5 * (m.positive_precision + negative_precision);
    m.recall = 0.5 * (m.positive_recall + negative_recall);
    m.f1 = 0.5 * (harmonic(m.positive_precision, m.positive_recall) + harmonic(negative_precision, negative_recall));
    return m;
}

Metrics compute_metrics(std::span<const std::size_t> predictions, std::span<const std::size_t> labels,
                        std::size_t positive_class) {
    if (predictions.size() != labels.size())
        fail(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                            std::to_string(labels.size()) + " labels");
    if (labels.empty()) fail(ErrorCode::EmptyInput, "no predictions to score");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_class;
        const bool true_pos = labels[i] == positive_class;
        if (pred_pos && true_pos) ++tp;
        else if (pred_pos) ++fp;
        else if (true_pos) ++fn;
        else ++tn;
    }
    return metrics_from_counts(tp, fp, fn, tn);
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const std::size_t> labels, std::size_t k,
                                                 std::uint64_t seed) {
    if (k < 2) fail(ErrorCode::InvalidArgument, "cross-validation needs k >= 2");
    if (labels.size() < k)
        fail(ErrorCode::TooFewRecords, std::to_string(labels.size()) + " records cannot fill " + std::to_string(k) +
                                           " folds");
    const auto order = stratified_order(labels, seed);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t pos = 0; pos < order.size(); ++pos) folds[pos % k].push_back(order[pos]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_split(std::span<const std::size_t> labels,
                                                                               double fraction, std::uint64_t seed) {
    const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> first, second;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto cut = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        first.insert(first.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(cut));
        second.insert(second.end(), members.begin() + static_cast<std::ptrdiff_t>(cut), members.end());
    }
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    return {std::move(first), std::move(second)};
}

CvResult summarize(std::vector<Metrics> folds) {
    CvResult r;
    r.folds = std::move(folds);
    if (r.folds.empty()) return r;
    const double k = static_cast<double>(r.folds.size());
    auto field = [&](auto getter, auto setter) {
        double mean = 0.0;
        for (const auto& m : r.folds) mean += getter(m);
        mean /= k;
        double var = 0.0;
        for (const auto& m : r.folds) var += (getter(m) - mean) * (getter(m) - mean);
        setter(r.mean, mean);
        setter(r.stddev, std::sqrt(var / k));
    };
#define COLLO_FIELD(name) \
    field([](const Metrics& m) { return m.name; }, [](Metrics& m, double v) { m.name = v; })
    COLLO_FIELD(accuracy);
    COLLO_FIELD(f1);
    COLLO_FIELD(recall);
    COLLO_FIELD(precision);
    COLLO_FIELD(tpr);
    COLLO_FIELD(tnr);
    COLLO_FIELD(positive_precision);
    COLLO_FIELD(positive_recall);
#undef COLLO_FIELD
    for (const auto& m : r.folds) {
        r.mean.tp += m.tp;
        r.mean.fp += m.fp;
        r.mean.fn += m.fn;
        r.mean.tn += m.tn;
    }
    return r;
}

CvResult cross_validate(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed,
                        const FoldTrainer& trainer) {
    const auto folds = make_folds(labels, k, seed);
    std::vector<Metrics> results;
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<std::size_t> train;
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        std::sort(train.begin(), train.end());
        results.push_back(trainer(f, train, folds[f]));
    }
    return summarize(std::move(results));
}

std::string metrics_csv(const CvResult& result) {
    std::ostringstream out;
    out << "fold,accuracy,f1,recall,precision,tpr,tnr,tp,fp,fn,tn\n";
    auto row = [&](const std::string& name, const Metrics& m) {
        out << name << ',' << format_double(m.accuracy) << ',' << format_double(m.f1) << ','
            << format_double(m.recall) << ',' << format_double(m.precision) << ',' << format_double(m.tpr) << ','
            << format_double(m.tnr) << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << '\n';
    };
    for (std::size_t f = 0; f < result.folds.size(); ++f) row(std::to_string(f), result.folds[f]);
    row("mean", result.mean);
    row("std", result.stddev);
    return out.str();
}

}  // namespace collo
