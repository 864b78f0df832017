#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "helprank/errors.hpp"
#include "helprank/pipeline.hpp"

namespace {

using helprank::PipelineConfig;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string reviews, items, format;
    std::string seed, folds, models;
    std::vector<std::string> overrides;  // section.key=value
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "Config file (INI-style sections)");
    cmd->add_option("-o,--out", args.out_dir, "Output directory (default: out)");
    cmd->add_option("--reviews", args.reviews, "Review file path");
    cmd->add_option("--items", args.items, "Item file path");
    cmd->add_option("--format", args.format, "Input format: json-lines or csv");
    cmd->add_option("--seed", args.seed, "Master seed");
    cmd->add_option("--folds", args.folds, "Cross-validation fold count");
    cmd->add_option("--models", args.models, "Model subset, e.g. M1,M2,M3");
    cmd->add_option("--set", args.overrides,
                    "Override any config key, e.g. --set study.folds=10");
}

PipelineConfig build_config(const CommonArgs& args) {
    std::map<std::string, std::string> kv;
    if (!args.config_path.empty()) kv = helprank::parse_ini(args.config_path);
    if (!args.reviews.empty()) kv["data.reviews"] = args.reviews;
    if (!args.items.empty()) kv["data.items"] = args.items;
    if (!args.format.empty()) kv["data.format"] = args.format;
    if (!args.seed.empty()) {
        kv["study.seed"] = args.seed;
        kv["recommend.seed"] = args.seed;
        kv["eval.seed"] = args.seed;
    }
    if (!args.folds.empty()) kv["study.folds"] = args.folds;
    if (!args.models.empty()) kv["study.models"] = args.models;
    for (const std::string& kvpair : args.overrides) {
        const auto eq = kvpair.find('=');
        if (eq == std::string::npos)
            throw helprank::ConfigError("--set expects key=value, got " + kvpair);
        kv[kvpair.substr(0, eq)] = kvpair.substr(eq + 1);
    }
    if (!args.out_dir.empty()) kv["output.dir"] = args.out_dir;
    PipelineConfig cfg = PipelineConfig::from_map(kv);
    if (const char* env_out = std::getenv("HELPRANK_OUT"); env_out && *env_out)
        cfg.out_dir = env_out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"helprank: review-helpfulness features, regression studies and "
                 "helpfulness-weighted recommendation"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string report_json;

    CLI::App* ingest = app.add_subcommand("ingest", "Load, filter and materialize the corpus");
    CLI::App* stats = app.add_subcommand("stats", "Descriptive statistics of the corpus");
    CLI::App* feats = app.add_subcommand("features", "Per-review feature matrix");
    CLI::App* study = app.add_subcommand("study", "Cross-validated M1/M2/M3 correlation study");
    CLI::App* trainh =
        app.add_subcommand("train-helpfulness", "Train the M3 forest and emit rating weights");
    CLI::App* recommend = app.add_subcommand("recommend", "Train a recommender, emit top-N lists");
    CLI::App* evaluate =
        app.add_subcommand("evaluate", "Cross-validated SVD_Helpfulness vs SVD++ comparison");
    CLI::App* report = app.add_subcommand("report", "Re-emit a stored JSON report as CSV");
    for (CLI::App* cmd : {ingest, stats, feats, study, trainh, recommend, evaluate, report})
        add_common(cmd, args);
    report->add_option("json", report_json, "Stored report (stats/study/eval JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);  // CLI11 prints the usage message
        return code == 0 ? 0 : 1;      // any parse failure is a usage error
    }

    try {
        const PipelineConfig cfg = build_config(args);
        std::string summary;
        if (*ingest) summary = helprank::stage_ingest(cfg);
        else if (*stats) summary = helprank::stage_stats(cfg);
        else if (*feats) summary = helprank::stage_features(cfg);
        else if (*study) summary = helprank::stage_study(cfg);
        else if (*trainh) summary = helprank::stage_train_helpfulness(cfg);
        else if (*recommend) summary = helprank::stage_recommend(cfg);
        else if (*evaluate) summary = helprank::stage_evaluate(cfg);
        else if (*report) summary = helprank::stage_report(cfg, report_json);
        std::cout << summary << '\n';
        return 0;
    } catch (const helprank::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const helprank::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const helprank::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
