#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "collo/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int status = -1;
    std::string out;
};

// Runs the CLI with stderr silenced through COLLO_LOG and captures stdout.
Outcome invoke(const std::string& args, const std::string& env = "COLLO_LOG=quiet") {
    const std::string cmd = env + " " + COLLO_CLI_PATH + " " + args + " 2>/dev/null";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    std::array<char, 512> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) o.out += buf.data();
    const int raw = pclose(pipe);
    o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return o;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("collo_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// A small experiment: short records, a two-block network and two epochs.
fs::path write_config(const fs::path& dir, std::size_t folds = 10) {
    std::ofstream f(dir / "c.ini");
    f << "[data]\nsegments = 16\nviews = euclidean:mean,cosine:mean\n"
      << "[model]\nwidths = 4,4\nepochs = 2\n"
      << "[cv]\nfolds = " << folds << "\n"
      << "[synth]\ncount = 40\nduration_s = 6\nnoise_std = 0.02\n";
    return dir / "c.ini";
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::size_t tree_height(const std::string& text) {
    std::size_t height = 0;
    for (const auto& l : lines_of(text)) {
        if (l.find("<=") == std::string::npos) continue;
        const std::size_t indent = l.find_first_not_of(' ');
        height = std::max(height, indent / 2 + 1);
    }
    return height;
}

}  // namespace

TEST(Cli, SynthIsDeterministic) {
    const auto dir = scratch("synth");
    const auto cfg = write_config(dir);
    const auto a = invoke("synth --config " + cfg.string() + " --count 12 --seed 7 --out " + (dir / "a").string());
    const auto b = invoke("synth --config " + cfg.string() + " --count 12 --seed 7 --out " + (dir / "b").string());
    const auto c = invoke("synth --config " + cfg.string() + " --count 12 --seed 8 --out " + (dir / "c").string());
    ASSERT_EQ(a.status, 0);
    ASSERT_EQ(b.status, 0);
    EXPECT_EQ(lines_of(a.out).size(), 1u);
    const auto manifest = collo::read_text_file(dir / "a" / "data" / "manifest.csv");
    EXPECT_EQ(lines_of(manifest).size(), 12u);
    EXPECT_EQ(manifest, collo::read_text_file(dir / "b" / "data" / "manifest.csv"));
    for (const char* f : {"signals/rec_00000.cecg", "signals/rec_00011.cecg", "annotations/rec_00004.csv"})
        EXPECT_EQ(collo::read_file_bytes(dir / "a" / "data" / f), collo::read_file_bytes(dir / "b" / "data" / f)) << f;
    EXPECT_NE(collo::read_file_bytes(dir / "a" / "data" / "signals/rec_00000.cecg"),
              collo::read_file_bytes(dir / "c" / "data" / "signals/rec_00000.cecg"));
}

TEST(Cli, TrainThenEvalWritesFoldMetrics) {
    const auto dir = scratch("train");
    const auto cfg = write_config(dir);
    const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string();
    ASSERT_EQ(invoke("synth" + common).status, 0);
    const auto train = invoke("train" + common);
    ASSERT_EQ(train.status, 0);
    EXPECT_EQ(lines_of(train.out).size(), 1u);
    const auto eval = invoke("eval" + common);
    ASSERT_EQ(eval.status, 0);
    EXPECT_EQ(eval.out.rfind("eval: ", 0), 0u);
    const auto rows = lines_of(collo::read_text_file(dir / "out" / "metrics.csv"));
    ASSERT_EQ(rows.size(), 13u);
    EXPECT_EQ(rows[0], "fold,accuracy,f1,recall,precision,tpr,tnr,tp,fp,fn,tn,seed");
    for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(rows[f + 1].substr(0, rows[f + 1].find(',')), std::to_string(f));
    EXPECT_EQ(rows[11].rfind("mean,", 0), 0u);
    EXPECT_EQ(rows[12].rfind("std,", 0), 0u);
    EXPECT_TRUE(fs::exists(dir / "out" / "MANIFEST.lock"));
    EXPECT_TRUE(fs::exists(dir / "out" / "config.ini"));
}

TEST(Cli, StagesMatchRunAndRespectTreeBounds) {
    const auto dir = scratch("stages");
    const auto cfg = write_config(dir, 3);
    const std::string staged = " --config " + cfg.string() + " --out " + (dir / "staged").string();
    const std::string whole = " --config " + cfg.string() + " --out " + (dir / "whole").string();
    ASSERT_EQ(invoke("synth" + staged).status, 0);
    ASSERT_EQ(invoke("synth" + whole).status, 0);
    for (const char* stage : {"train", "eval", "saliency", "decode", "rank"}) {
        const auto r = invoke(std::string(stage) + staged);
        EXPECT_EQ(r.status, 0) << stage;
        EXPECT_EQ(lines_of(r.out).size(), 1u) << stage;
    }
    ASSERT_EQ(invoke("trees --t-max 4 --h-max 2" + staged).status, 0);
    ASSERT_EQ(invoke("report" + staged).status, 0);
    ASSERT_EQ(invoke("run --t-max 4 --h-max 2" + whole).status, 0);
    for (const char* f : {"metrics.csv", "predictions.csv", "rankings.csv", "saliency/class_0.csv",
                          "ratings/unary.csv", "trees/tree.txt", "trees/summary.csv", "checkpoints/fold_02.cckp",
                          "report.md"})
        EXPECT_EQ(collo::read_file_bytes(dir / "staged" / f), collo::read_file_bytes(dir / "whole" / f)) << f;

    EXPECT_LE(tree_height(collo::read_text_file(dir / "staged" / "trees" / "tree.txt")), 2u);
    const auto summary = lines_of(collo::read_text_file(dir / "staged" / "trees" / "summary.csv"));
    ASSERT_EQ(summary.size(), 2u);
    const auto quoted = summary[1].substr(summary[1].find('"') + 1);
    const auto names = quoted.substr(0, quoted.find('"'));
    EXPECT_LE(static_cast<std::size_t>(std::count(names.begin(), names.end(), ' ')) + 1, 4u);
}

TEST(Cli, TreesHonourBoundsOnLargerGrid) {
    const auto dir = scratch("bounds");
    const auto cfg = write_config(dir, 3);
    const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string();
    ASSERT_EQ(invoke("synth" + common).status, 0);
    ASSERT_EQ(invoke("run --t-max 10 --h-max 6" + common).status, 0);
    EXPECT_LE(tree_height(collo::read_text_file(dir / "out" / "trees" / "tree.txt")), 6u);
    const auto grid = lines_of(collo::read_text_file(dir / "out" / "trees" / "grid.csv"));
    EXPECT_EQ(grid.size(), 61u);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(invoke("").status, 1);
    EXPECT_EQ(invoke("frobnicate").status, 1);
    EXPECT_EQ(invoke("train --bogus").status, 1);
    EXPECT_EQ(invoke("synth --count abc").status, 1);
    const auto dir = scratch("usage");
    {
        std::ofstream f(dir / "bad.ini");
        f << "[model]\nwidht = 3\n";
    }
    EXPECT_EQ(invoke("synth --config " + (dir / "bad.ini").string()).status, 1);
    EXPECT_EQ(invoke("synth --config " + (dir / "missing.ini").string()).status, 2);
    EXPECT_EQ(invoke("--help").status, 0);
}

TEST(Cli, DataErrorsExitTwo) {
    const auto dir = scratch("data");
    const auto cfg = write_config(dir, 3);
    const std::string common = " --config " + cfg.string() + " --out " + (dir / "out").string();
    EXPECT_EQ(invoke("train" + common).status, 2);
    ASSERT_EQ(invoke("synth" + common).status, 0);
    EXPECT_EQ(invoke("eval" + common).status, 2);
    ASSERT_EQ(invoke("train" + common).status, 0);
    collo::write_text_file(dir / "out" / "checkpoints" / "fold_01.cckp", "garbage");
    EXPECT_EQ(invoke("eval" + common).status, 2);
}

TEST(Cli, LogLevelControlsStderr) {
    const auto dir = scratch("log");
    const auto cfg = write_config(dir);
    const std::string base = std::string(COLLO_CLI_PATH) + " synth --count 2 --config " + cfg.string() + " --out " +
                             (dir / "out").string() + " 2>&1 >/dev/null";
    auto capture = [&](const std::string& env) {
        std::string text;
        FILE* pipe = popen((env + " " + base).c_str(), "r");
        std::array<char, 512> buf{};
        while (std::fgets(buf.data(), buf.size(), pipe)) text += buf.data();
        pclose(pipe);
        return text;
    };
    EXPECT_TRUE(capture("COLLO_LOG=quiet").empty());
    EXPECT_NE(capture("COLLO_LOG=info").find("synthesized"), std::string::npos);
}
