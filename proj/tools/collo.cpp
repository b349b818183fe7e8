#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include "collo/error.hpp"
#include "collo/pipeline.hpp"

namespace {

using namespace collo;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("collo");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("COLLO_LOG");
    const std::string level = env ? env : "info";
    if (level == "quiet") spdlog::set_level(spdlog::level::off);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::set_level(spdlog::level::info);
}

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> count;
    std::optional<std::size_t> t_max;
    std::optional<std::size_t> h_max;
};

RunConfig resolve(const Options& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.count) c.synth_count = *o.count;
    if (o.t_max) c.t_max = *o.t_max;
    if (o.h_max) c.h_max = *o.h_max;
    c.validate(false);
    return c;
}

int run(const std::string& command, const Options& o) {
    const RunConfig config = resolve(o);
    if (command == "synth") {
        const auto manifest = stage_synth(config);
        std::cout << "synth: " << config.synth_count << " records, manifest " << manifest.string() << '\n';
        return kOk;
    }
    if (command == "run") {
        const auto r = run_experiment(config);
        std::cout << "run: mean accuracy " << r.metrics.mean.accuracy << "%, top pair "
                  << r.ranking.comparative.front().attribute.name() << ", tree held-out accuracy "
                  << r.tree.heldout.accuracy << "%\n";
        return kOk;
    }
    config.validate(true);
    Workspace ws(config);
    if (command == "train") {
        stage_train(ws);
        std::cout << "train: " << config.folds << " fold checkpoints in " << (config.output_dir / "checkpoints").string()
                  << '\n';
    } else if (command == "eval") {
        const auto r = stage_eval(ws);
        std::cout << "eval: mean accuracy " << r.mean.accuracy << "% over " << r.folds.size() << " folds\n";
    } else if (command == "saliency") {
        stage_saliency(ws);
        std::cout << "saliency: maps in " << (config.output_dir / "saliency").string() << '\n';
    } else if (command == "decode") {
        stage_decode(ws);
        std::cout << "decode: ratings in " << (config.output_dir / "ratings").string() << '\n';
    } else if (command == "rank") {
        const auto r = stage_rank(ws);
        std::cout << "rank: top comparative " << r.comparative.front().attribute.name() << ", top unary "
                  << r.unary.front().attribute.name() << '\n';
    } else if (command == "trees") {
        const auto s = stage_trees(ws);
        std::cout << "trees: t=" << s.t << " h=" << s.h << " height " << s.height << ", held-out accuracy "
                  << s.heldout.accuracy << "%\n";
    } else if (command == "report") {
        stage_report(ws);
        std::cout << "report: " << (config.output_dir / "report.md").string() << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    static const std::set<std::string> commands{"synth",  "train", "eval",  "saliency", "decode",
                                                "rank",   "trees", "report", "run"};
    CLI::App app{"Collocative ECG learning: synthesis, training, saliency and evidence trees"};
    app.require_subcommand(1);
    Options o;
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", o.config, "INI run configuration");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "root seed");
        if (name == "synth") sub->add_option("--count", o.count, "number of records");
        if (name == "trees" || name == "run") {
            sub->add_option("--t-max", o.t_max, "maximum number of attributes");
            sub->add_option("--h-max", o.h_max, "maximum tree height");
        }
    }
    if (argc > 1 && argv[1][0] != '-' && !commands.contains(argv[1])) {
        std::cerr << collo::Error(collo::ErrorCode::UnknownSubcommand, argv[1]).what() << '\n';
        return kUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    configure_logging();
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, o);
    } catch (const collo::Error& e) {
        std::cerr << "collo " << command << ": " << e.what() << '\n';
        const auto c = e.code();
        return c == collo::ErrorCode::ConfigParseError || c == collo::ErrorCode::UnknownSubcommand ? kUsage : kData;
    } catch (const std::exception& e) {
        std::cerr << "collo " << command << ": " << e.what() << '\n';
        return kData;
    }
}
