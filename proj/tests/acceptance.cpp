#include <spdlog/spdlog.h>

#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "collo/cag.hpp"
#include "collo/collocative.hpp"
#include "collo/decoding.hpp"
#include "collo/eval.hpp"
#include "collo/evidence.hpp"
#include "collo/io.hpp"
#include "collo/network.hpp"
#include "collo/pipeline.hpp"
#include "collo/signal.hpp"
#include "oracles.hpp"

using namespace collo;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fixed(double v, int digits = 2) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
}

// ---- 1: gradients -----------------------------------------------------------

void gradients(Verdict& v) {
    const double start = cpu_seconds();
    double weights = 0.0, cag = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = oracle::gradient_check(oracle::tiny_config(), seed);
        weights = std::max(weights, r.weights);
        cag = std::max(cag, r.cag);
    }
    const double took = cpu_seconds() - start;
    v.detail << "5 seeds, worst relative error weights " << weights << ", cag " << cag << ", " << fixed(took) << " s";
    v.require(weights <= 1e-4, "weights <= 1e-4");
    v.require(cag <= 1e-6, "cag <= 1e-6");
    v.require(took < 60.0, "runtime < 1 min");
}

// ---- 2: periodicity ---------------------------------------------------------

void periodicity(Verdict& v) {
    // 40 samples per segment and 320 samples per beat: T0 = 8 segments.
    constexpr std::size_t n = 64, t0 = 8;
    SyntheticParams p;
    p.sample_rate = 250.0;
    p.rr_interval_s = 1.28;
    p.duration_s = 10.24;
    const auto record = normalize(synthesize_ecg(p, Label::non_eating, 3));
    const auto series = segment(record, n);
    const std::vector<SegmentSeries> pool{series};
    const auto cov = estimate_inverse_covariance(pool);
    const auto views = default_views();
    double worst = 0.0;
    bool diagonal = true;
    for (const auto& view : views) {
        const auto r = relation_matrix(series, view, &cov);
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<Eigen::Index>(i);
            diagonal &= r.values(a, a) == extract_feature(series.segments[i], view.feature);
            for (std::size_t j = 0; j + t0 < n && i + t0 < n; ++j) {
                const auto b = static_cast<Eigen::Index>(j), s = static_cast<Eigen::Index>(t0);
                worst = std::max(worst, std::abs(r.values(a + s, b + s) - r.values(a, b)));
            }
        }
    }
    v.detail << views.size() << " views, n=" << n << ", T0=" << t0 << ", worst shift difference " << worst
             << ", diagonal " << (diagonal ? "bit-exact" : "differs");
    v.require(series.window * t0 == static_cast<std::size_t>(p.rr_interval_s * p.sample_rate), "beat = T0 segments");
    v.require(worst <= 1e-6, "shift difference <= 1e-6");
    v.require(diagonal, "diagonal equals f(s_i)");
}

// ---- 3: decoding ------------------------------------------------------------

void decoding(Verdict& v) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u;
    std::bernoulli_distribution coin(0.3);
    double worst = 0.0;
    bool uniform_exact = true;
    std::size_t largest = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t s = 1 + rng() % 64, w = 1 + rng() % 15;
        largest = std::max(largest, s);
        const auto rows = static_cast<Eigen::Index>(s), cols = static_cast<Eigen::Index>(w);
        MembershipMatrix m;
        m.values = Eigen::MatrixXd::Zero(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index p = 0; p < cols; ++p) m.values(i, p) = coin(rng) ? 1.0 : 0.0;
        Eigen::MatrixXd sal(rows, rows);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < rows; ++j) sal(i, j) = u(rng);
        const auto unary = unary_rating(sal, m);
        const auto pairs = pairwise_rating(sal, m);
        const double cells = static_cast<double>(s) * static_cast<double>(s);
        for (Eigen::Index p = 0; p < cols; ++p) {
            double want = 0.0;
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < rows; ++j) want += sal(i, j) * (m.values(i, p) + m.values(j, p)) / (2.0 * cells);
            worst = std::max(worst, std::abs(unary(p) - want));
            for (Eigen::Index q = 0; q < cols; ++q) {
                double pair = 0.0;
                for (Eigen::Index i = 0; i < rows; ++i)
                    for (Eigen::Index j = 0; j < rows; ++j)
                        if (m.values(i, p) == 1.0 && m.values(j, q) == 1.0) pair += sal(i, j);
                worst = std::max(worst, std::abs(pairs(p, q) - pair));
            }
        }
        const auto flat = unary_rating(Eigen::MatrixXd::Ones(rows, rows), m);
        for (Eigen::Index p = 0; p < cols; ++p) uniform_exact &= flat(p) == m.values.col(p).sum() / static_cast<double>(s);
    }
    v.detail << "100 instances up to |S|=" << largest << ", worst difference " << worst << ", uniform saliency "
             << (uniform_exact ? "exact" : "inexact");
    v.require(worst <= 1e-9, "naive loops within 1e-9");
    v.require(uniform_exact, "uniform saliency equals membership fraction");
}

// ---- 4: masks ---------------------------------------------------------------

void masks(Verdict& v) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0), t(0.5, 40.0);
    std::size_t checked = 0;
    bool geometry = true;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(trial) % 64;
        const auto mask = cag::build_mask({u(rng), u(rng), u(rng), t(rng)}, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                const double x = mask.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                geometry &= x == mask.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
                geometry &= x == mask.profile[i > j ? i - j : j - i];
                geometry &= x >= 0.0 && x <= 1.0;
            }
        ++checked;
    }
    const auto spacing = cag::stripe_spacing(cag::build_mask({0.5, 0.0, 0.5, 8.0}, 64));
    v.detail << checked << " random masks diagonal-constant, symmetric, in [0,1]: " << (geometry ? "yes" : "no")
             << "; m=64, T=8 stripe spacing " << spacing;
    v.require(geometry, "mask geometry");
    v.require(spacing == 8, "stripe spacing 8");
}

// ---- 5 and 6: known-answer experiment ---------------------------------------

RunConfig known_answer_config(const fs::path& out) {
    RunConfig c;
    c.output_dir = out;
    c.synth_count = 2000;
    c.synth.noise_std = 0.05;
    c.synth.class_effect = 0.15;
    c.synth.rr_jitter = 0.03;
    c.synth.beat_jitter = 0.05;
    c.folds = 10;
    c.seed = 1;
    c.t_max = 10;
    c.h_max = 6;
    return c;
}

struct KnownAnswer {
    bool ran = false;
    RunConfig config;
    CvResult multi, single;
    double multi_seconds = 0.0, single_seconds = 0.0;
};

void classification(Verdict& v, KnownAnswer& ka, const fs::path& work) {
    ka.config = known_answer_config(work / "known_answer");
    stage_synth(ka.config);
    {
        Workspace ws(ka.config);
        const double start = cpu_seconds();
        stage_train(ws);
        ka.multi = stage_eval(ws);
        ka.multi_seconds = cpu_seconds() - start;
    }
    RunConfig base = ka.config;
    base.output_dir = work / "baseline";
    base.manifest = ka.config.manifest_path();
    base.views = parse_view_list("euclidean:mean");
    base.model.use_cag = false;
    {
        Workspace ws(base);
        const double start = cpu_seconds();
        stage_train(ws);
        ka.single = stage_eval(ws);
        ka.single_seconds = cpu_seconds() - start;
    }
    ka.ran = true;
    const double total = ka.multi_seconds + ka.single_seconds;
    v.detail << "10-fold mean accuracy multi-view+CAG " << fixed(ka.multi.mean.accuracy) << "% (std "
             << fixed(ka.multi.stddev.accuracy) << "), single-view euclidean " << fixed(ka.single.mean.accuracy)
             << "% (std " << fixed(ka.single.stddev.accuracy) << "); CPU " << fixed(ka.multi_seconds / 60.0)
             << " + " << fixed(ka.single_seconds / 60.0) << " min";
    v.require(ka.multi.mean.accuracy >= 90.0, "multi-view >= 90%");
    v.require(ka.multi.mean.accuracy > ka.single.mean.accuracy, "multi-view > single-view");
    v.require(total <= 30.0 * 60.0, "CPU runtime <= 30 min");
}

void evidence(Verdict& v, const KnownAnswer& ka) {
    if (!ka.ran) {
        v.require(false, "criterion 5 experiment did not run");
        return;
    }
    Workspace ws(ka.config);
    const double start = cpu_seconds();
    stage_saliency(ws);
    stage_decode(ws);
    const auto ranking = stage_rank(ws);
    const auto tree = stage_trees(ws);
    const double took = cpu_seconds() - start;

    const auto list = ranking.comparative_list();
    std::string top;
    bool st_or_tp = false;
    for (std::size_t i = 0; i < 5 && i < list.size(); ++i) {
        top += (i ? " " : "") + list[i].name();
        for (Genre g : {Genre::ST, Genre::TP})
            st_or_tp |= list[i].first == g || (list[i].second && *list[i].second == g);
    }
    bool ranked_only = tree.t <= 10 && tree.attributes.size() == tree.t;
    for (std::size_t i = 0; i < tree.attributes.size() && ranked_only; ++i) ranked_only = tree.attributes[i] == list[i];
    v.detail << "top-5 comparative " << top << "; tree t=" << tree.t << " h=" << tree.h << " height " << tree.height
             << ", held-out accuracy " << fixed(tree.heldout.accuracy) << "% on " << tree.heldout.total()
             << " records; " << fixed(took) << " s";
    v.require(st_or_tp, "ST or TP pair in top 5");
    v.require(tree.heldout.accuracy >= 80.0, "held-out accuracy >= 80%");
    v.require(ranked_only && tree.height <= 6, "tree uses only the top-t ranked attributes within h_max");
    v.require(took <= 600.0, "runtime <= 10 min");
}

// ---- 7: tree and forest oracles ---------------------------------------------

FeatureTable random_table(std::size_t rows, std::size_t features, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    std::uniform_int_distribution<int> level(0, 3);
    const bool discrete = seed % 3 == 0;
    FeatureTable t;
    for (std::size_t f = 0; f < features; ++f) t.columns.push_back("f" + std::to_string(f));
    for (std::size_t r = 0; r < rows; ++r) {
        std::vector<double> row(features);
        for (double& x : row) x = discrete ? level(rng) : u(rng);
        t.rows.push_back(row);
        t.labels.push_back(row[0] + 0.5 * u(rng) > 0.6 ? 1 : 0);
    }
    return t;
}

void trees(Verdict& v) {
    const double start = cpu_seconds();
    std::size_t agree = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto t = random_table(10 + seed % 40, 1 + seed % 5, seed);
        std::vector<std::size_t> rows(t.size()), features(t.columns.size());
        std::iota(rows.begin(), rows.end(), 0);
        std::iota(features.begin(), features.end(), 0);
        const auto want = oracle::brute_force_split(t, rows, features);
        const auto stump = build_tree(t, features, 1);
        const auto& root = stump.nodes[0];
        const std::size_t ones = std::accumulate(t.labels.begin(), t.labels.end(), std::size_t{0});
        if (!want.found || ones == 0 || ones == t.size()) {
            agree += root.leaf;
        } else if (!root.leaf) {
            agree += std::find(want.best.begin(), want.best.end(), std::pair{root.feature, root.threshold}) !=
                     want.best.end();
        }
    }

    FeatureTable x;
    x.columns = {"a", "b"};
    for (int k = 0; k < 5; ++k)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                x.rows.push_back({static_cast<double>(a), static_cast<double>(b)});
                x.labels.push_back(static_cast<std::size_t>(a ^ b));
            }
    const std::vector<std::size_t> ab{0, 1};
    auto accuracy = [&](auto&& predict) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < x.size(); ++r) hits += predict(x.rows[r]) == x.labels[r];
        return 100.0 * static_cast<double>(hits) / static_cast<double>(x.size());
    };
    const auto depth1 = build_tree(x, ab, 1), depth2 = build_tree(x, ab, 2);
    const double acc1 = accuracy([&](const auto& r) { return depth1.predict(r); });
    const double acc2 = accuracy([&](const auto& r) { return depth2.predict(r); });
    ForestConfig fc;
    fc.rounds = 10;
    fc.max_depth = 2;
    fc.learning_rate = 0.3;
    const auto forest = build_forest(x, ab, fc);
    const double accf = accuracy([&](const auto& r) { return forest.predict(r); });

    bool grid_match = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> d;
        FeatureTable t;
        std::vector<Attribute> ranking;
        for (std::size_t a = 0; a < 6; ++a) {
            ranking.push_back(Attribute::unary(all_genres()[a]));
            t.columns.push_back("a" + std::to_string(a) + ":mean");
            t.columns.push_back("a" + std::to_string(a) + ":std");
        }
        for (std::size_t r = 0; r < 100; ++r) {
            std::vector<double> row(12);
            for (double& val : row) val = d(rng);
            row[4] += 1.5 * static_cast<double>(r % 2);
            t.rows.push_back(row);
            t.labels.push_back(r % 2);
        }
        SelectionConfig sc;
        sc.t_max = 6;
        sc.h_max = 4;
        sc.seed = seed;
        const auto sel = select_attributes(ranking, t, sc);
        const auto want = oracle::reevaluate_grid(t, sel.fit_rows, sel.score_rows, 6, 4);
        grid_match &= sel.grid == want.grid && sel.t == want.t && sel.h == want.h && sel.score == want.score;
    }
    const double took = cpu_seconds() - start;
    v.detail << "stump = brute force on " << agree << "/50 datasets; XOR accuracy depth 1 " << fixed(acc1)
             << "%, depth 2 " << fixed(acc2) << "% (height " << depth2.height() << "), forest (10 rounds) "
             << fixed(accf) << "%; grid re-evaluation " << (grid_match ? "identical" : "differs") << "; "
             << fixed(took) << " s";
    v.require(agree == 50, "stump equals brute force");
    v.require(acc1 < 100.0 && acc2 == 100.0 && depth2.height() == 2, "XOR needs depth 2");
    v.require(accf == 100.0, "forest solves XOR");
    v.require(grid_match, "grid re-evaluation");
    v.require(took < 60.0, "runtime < 1 min");
}

// ---- 8: metrics and folds ---------------------------------------------------

void metrics(Verdict& v) {
    const auto m = metrics_from_counts(3, 1, 2, 4);
    std::vector<std::size_t> pred, label;
    for (auto [count, p, l] : {std::tuple{3, 1, 1}, {1, 1, 0}, {2, 0, 1}, {4, 0, 0}})
        for (int k = 0; k < count; ++k) pred.push_back(p), label.push_back(l);
    const auto c = compute_metrics(pred, label);
    v.detail << "accuracy " << c.accuracy << ", TPR " << c.tpr << ", TNR " << c.tnr << ", positive precision "
             << c.positive_precision;
    v.require(c.accuracy == 70.0 && c.tpr == 60.0 && c.tnr == 80.0, "example exact");
    v.require(c.positive_precision == 75.0 && m.accuracy == c.accuracy, "example consistent");

    bool partition = true;
    for (std::size_t records : {100u, 2000u}) {
        std::vector<std::size_t> labels(records);
        for (std::size_t i = 0; i < records; ++i) labels[i] = i % 2;
        const auto folds = make_folds(labels, 10, 1);
        std::vector<int> seen(records, 0);
        for (const auto& f : folds) {
            partition &= f.size() == records / 10;
            for (auto i : f) ++seen[i];
        }
        partition &= std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
    }
    v.detail << "; 10 folds over 100 and 2000 records disjoint and covering with 90/10 sizes: "
             << (partition ? "yes" : "no");
    v.require(partition, "10-fold partition");
}

// ---- 9: determinism ---------------------------------------------------------

void determinism(Verdict& v, const KnownAnswer& ka, const fs::path& work) {
    const double start = cpu_seconds();
    auto config_at = [&](const fs::path& out) {
        RunConfig c = known_answer_config(out);
        c.synth_count = 200;
        return c;
    };
    const auto a = config_at(work / "rerun_a"), b = config_at(work / "rerun_b");
    stage_synth(a);
    stage_synth(b);
    run_experiment(a);
    run_experiment(b);
    std::vector<fs::path> compared{"metrics.csv", "predictions.csv", "rankings.csv", "trees/tree.txt",
                                   "saliency/class_0.csv", "saliency/class_1.csv"};
    for (std::size_t f = 0; f < a.folds; ++f) {
        compared.push_back(fold_paths("", f).checkpoint);
        compared.push_back(fold_paths("", f).preprocessing);
    }
    std::size_t identical = 0;
    for (const auto& f : compared) identical += read_file_bytes(a.output_dir / f) == read_file_bytes(b.output_dir / f);

    std::size_t round_trips = 0, checkpoints = 0;
    if (ka.ran) {
        for (std::size_t f = 0; f < ka.config.folds; ++f) {
            ++checkpoints;
            const auto bytes = read_file_bytes(fold_paths(ka.config.output_dir, f).checkpoint);
            const auto cp = load_checkpoint(bytes);
            const auto again = load_checkpoint(save_checkpoint(cp));
            const auto& p = cp.model.parameters();
            const auto& q = again.model.parameters();
            round_trips += save_checkpoint(cp) == bytes && p.size() == q.size() &&
                           std::memcmp(p.data(), q.data(), p.size() * sizeof(double)) == 0;
        }
    }
    const double took = cpu_seconds() - start;
    v.detail << "200-record full experiment run twice: " << identical << "/" << compared.size()
             << " artifacts byte-identical; " << round_trips << "/" << checkpoints
             << " known-answer checkpoints round-trip bit-exact; " << fixed(took / 60.0) << " min";
    v.require(identical == compared.size(), "byte-identical reruns");
    v.require(ka.ran && round_trips == checkpoints, "checkpoint round-trip");
    v.require(!ka.ran || took <= ka.multi_seconds + ka.single_seconds, "runtime <= criterion 5 runtime");
}

}  // namespace

int main(int argc, char** argv) {
    const char* log = std::getenv("COLLO_LOG");
    spdlog::set_level(log && std::string(log) == "info" ? spdlog::level::info : spdlog::level::warn);
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
    fs::remove_all(work);
    fs::create_directories(work);

    KnownAnswer ka;
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria{
        {"gradient correctness", gradients},
        {"periodicity encoding", periodicity},
        {"decoding oracle equivalence", decoding},
        {"mask geometry", masks},
        {"known-answer classification", [&](Verdict& v) { classification(v, ka, work); }},
        {"evidence recovery", [&](Verdict& v) { evidence(v, ka); }},
        {"tree and forest oracles", trees},
        {"metrics and cross-validation", metrics},
        {"determinism and persistence", [&](Verdict& v) { determinism(v, ka, work); }},
    };
    std::size_t failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            criteria[i].second(v);
        } catch (const std::exception& e) {
            v.require(false, std::string("exception: ") + e.what());
        }
        failed += !v.pass;
        std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (v.pass ? "PASS" : "FAIL") << " |"
                  << v.detail.str() << std::endl;
    }
    std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
