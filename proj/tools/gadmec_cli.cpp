// Command-line surface over the pipeline stages. Every subcommand takes a
// run config; artifacts land in the config's output directory unless --out
// overrides it.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gadmec/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_override;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run config file")->required();
    cmd->add_option("--out", args.out_override, "override the output directory");
}

gadmec::run::RunConfig load(const CommonArgs& args) {
    auto cfg = gadmec::run::load_run_config(args.config_path);
    if (!args.out_override.empty()) {
        cfg.output_dir = args.out_override;
        cfg.base_dir.clear(); // --out is relative to the caller, not the config
    }
    return cfg;
}

std::vector<std::string> parse_arms(const std::string& arms) {
    const auto comma = arms.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= arms.size())
        throw gadmec::Error(gadmec::ErrorCode::ConfigurationError,
                            "--arms expects two method names separated by a comma");
    std::string x = arms.substr(0, comma);
    std::string y = arms.substr(comma + 1);
    if (y.find(',') != std::string::npos)
        throw gadmec::Error(gadmec::ErrorCode::ConfigurationError,
                            "--arms expects exactly two method names");
    return {x, y};
}

std::vector<std::string> sorted_matches(const std::string& dir, const std::string& prefix,
                                        const std::string& suffix) {
    std::vector<std::string> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() > prefix.size() + suffix.size() &&
            name.compare(0, prefix.size(), prefix) == 0 &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"evidence selection and judged-comparison pipeline"};
    app.require_subcommand(1);

    CommonArgs validate_args, ingest_args, pool_args, select_args, judge_args, analyze_args,
        agree_args, report_args;

    auto* validate = app.add_subcommand("validate", "audit a run config end to end");
    add_common(validate, validate_args);

    auto* ingest = app.add_subcommand("ingest", "normalize external answer files");
    add_common(ingest, ingest_args);

    auto* pool = app.add_subcommand("pool", "materialise per-question candidate pools");
    add_common(pool, pool_args);

    auto* select = app.add_subcommand("select", "build evidence plans for a preset");
    add_common(select, select_args);
    std::vector<std::string> select_presets;
    select->add_option("--preset", select_presets,
                       "selector preset(s); defaults to the config's list");
    std::optional<std::uint64_t> select_seed;
    select->add_option("--seed", select_seed, "override the evolutionary seed");

    auto* judge = app.add_subcommand("judge", "run blinded pairwise judging for two arms");
    add_common(judge, judge_args);
    std::string judge_arms;
    judge->add_option("--arms", judge_arms, "the two methods to compare, e.g. gadmec,greedy")
        ->required();
    std::string judge_backend;
    judge->add_option("--backend", judge_backend, "override the judge backend (mock|http)");
    unsigned judge_concurrency = 0;
    judge->add_option("--concurrency", judge_concurrency, "parallel judge calls");
    std::optional<std::uint64_t> judge_seed;
    judge->add_option("--seed", judge_seed, "override the judging seed");

    auto* analyze = app.add_subcommand("analyze", "statistical analysis of verdict files");
    add_common(analyze, analyze_args);
    std::vector<std::string> analyze_inputs;
    analyze->add_option("verdicts", analyze_inputs,
                        "verdict files; defaults to every verdicts_*.jsonl in the output dir");

    auto* agree = app.add_subcommand("agree", "inter-judge agreement for one comparison");
    add_common(agree, agree_args);
    std::vector<std::string> agree_inputs;
    agree->add_option("verdicts", agree_inputs, "exactly two verdict files")
        ->expected(2)
        ->required();

    auto* report = app.add_subcommand("report", "render analyses to markdown and CSV");
    add_common(report, report_args);
    std::vector<std::string> report_inputs;
    report->add_option("analyses", report_inputs,
                       "analysis/agreement files; defaults to the output dir's contents");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate)) {
            auto cfg = load(validate_args);
            auto rep = gadmec::run::cmd_validate(cfg);
            std::cout << "config " << rep.config_hash << "\n";
            for (const auto& check : rep.checks)
                std::cout << "ok " << check.name << ": " << check.detail << "\n";
            std::cout << "valid\n";
        } else if (app.got_subcommand(ingest)) {
            auto cfg = load(ingest_args);
            for (const auto& s : gadmec::run::cmd_ingest(cfg)) {
                std::cout << s.path << " (" << s.count << " answers";
                if (!s.unknown_questions.empty())
                    std::cout << ", " << s.unknown_questions.size() << " unknown question ids";
                std::cout << ")\n";
            }
        } else if (app.got_subcommand(pool)) {
            auto cfg = load(pool_args);
            std::cout << gadmec::run::cmd_pool(cfg) << "\n";
        } else if (app.got_subcommand(select)) {
            auto cfg = load(select_args);
            const auto& presets = select_presets.empty() ? cfg.presets : select_presets;
            for (const auto& preset : presets)
                std::cout << gadmec::run::cmd_select(cfg, preset, select_seed) << "\n";
        } else if (app.got_subcommand(judge)) {
            auto cfg = load(judge_args);
            auto arms = parse_arms(judge_arms);
            std::cout << gadmec::run::cmd_judge(cfg, arms[0], arms[1], judge_backend,
                                                judge_concurrency, judge_seed)
                      << "\n";
        } else if (app.got_subcommand(analyze)) {
            auto cfg = load(analyze_args);
            auto inputs = analyze_inputs;
            if (inputs.empty())
                inputs = sorted_matches(gadmec::run::output_dir(cfg), "verdicts_", ".jsonl");
            for (const auto& path : gadmec::run::cmd_analyze(cfg, inputs))
                std::cout << path << "\n";
        } else if (app.got_subcommand(agree)) {
            auto cfg = load(agree_args);
            std::cout << gadmec::run::cmd_agree(cfg, agree_inputs[0], agree_inputs[1]) << "\n";
        } else if (app.got_subcommand(report)) {
            auto cfg = load(report_args);
            auto inputs = report_inputs;
            if (inputs.empty()) {
                inputs = sorted_matches(gadmec::run::output_dir(cfg), "analysis_", ".json");
                auto extra =
                    sorted_matches(gadmec::run::output_dir(cfg), "agreement_", ".json");
                inputs.insert(inputs.end(), extra.begin(), extra.end());
            }
            std::cout << gadmec::run::cmd_report(cfg, inputs) << "\n";
        }
    } catch (const gadmec::Error& e) {
        std::cerr << "error [" << gadmec::error_code_name(e.code()) << "]: " << e.what()
                  << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
