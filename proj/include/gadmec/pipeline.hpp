#pragma once

// Pipeline stages behind the CLI: validate, ingest, pool, select, judge,
// analyze, agree, report. Each stage reads the run config plus artifacts
// written by earlier stages, writes schema-versioned JSON or JSON-lines, and
// stamps the config hash into every output header. No stage keeps hidden
// state, so rerunning any stage with the same inputs reproduces its outputs
// byte for byte.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "gadmec/agreement.hpp"
#include "gadmec/baselines.hpp"
#include "gadmec/brkga.hpp"
#include "gadmec/config.hpp"
#include "gadmec/corpus.hpp"
#include "gadmec/diagnostics.hpp"
#include "gadmec/fitness.hpp"
#include "gadmec/judge_http.hpp"
#include "gadmec/judging.hpp"
#include "gadmec/jsonl.hpp"
#include "gadmec/stats.hpp"

namespace gadmec::run {

// ---- selector presets --------------------------------------------------------

struct SelectorPreset {
    std::string name;
    enum class Kind { Evolved, Greedy, Mmr, Bm25 } kind = Kind::Evolved;
    fitness::FitnessWeights weights;
    brkga::BrkgaConfig brkga;
};

/// Preset names accept both the long spelling used in artifacts
/// (gadmec_hybrid03) and the short ablation spelling (hybrid03); the
/// canonical long form is recorded in every plan.
inline SelectorPreset resolve_preset(const std::string& raw, const RunConfig& cfg) {
    std::string name = raw;
    if (name == "pure") name = "gadmec";
    else if (name == "hybrid03") name = "gadmec_hybrid03";
    else if (name == "hybrid05") name = "gadmec_hybrid05";
    else if (name == "random_fitness") name = "gadmec_random_fitness";
    else if (name == "no_subaspect") name = "gadmec_no_subaspect";
    else if (name == "no_constraints") name = "gadmec_no_constraints";

    SelectorPreset p;
    p.name = name;
    p.weights = cfg.weights;
    p.brkga = cfg.brkga;
    p.brkga.budget_tokens = cfg.budget_tokens;

    if (name == "gadmec") {
    } else if (name == "gadmec_hybrid03") {
        p.weights.zeta = 0.3;
    } else if (name == "gadmec_hybrid05") {
        p.weights.zeta = 0.5;
    } else if (name == "gadmec_random_fitness") {
        p.brkga.use_random_fitness = true;
    } else if (name == "gadmec_no_subaspect") {
        p.weights.epsilon = 0.0;
    } else if (name == "gadmec_no_constraints") {
        p.brkga.constraints_enabled = false;
    } else if (name == "greedy") {
        p.kind = SelectorPreset::Kind::Greedy;
    } else if (name == "mmr") {
        p.kind = SelectorPreset::Kind::Mmr;
    } else if (name == "bm25") {
        p.kind = SelectorPreset::Kind::Bm25;
    } else {
        throw Error(ErrorCode::ConfigurationError, "unknown selector preset '" + raw + "'");
    }
    p.weights.validate();
    p.brkga.validate();
    return p;
}

// ---- shared plumbing -----------------------------------------------------------

namespace detail {

inline std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out;
}

inline std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

} // namespace detail

inline std::string output_dir(const RunConfig& cfg) { return cfg.resolve(cfg.output_dir); }

inline void ensure_output_dir(const RunConfig& cfg) {
    std::filesystem::create_directories(output_dir(cfg));
}

inline std::string answers_path(const RunConfig& cfg, const std::string& method) {
    return output_dir(cfg) + "/answers_" + detail::sanitize(method) + ".jsonl";
}

inline std::string pools_path(const RunConfig& cfg) { return output_dir(cfg) + "/pools.jsonl"; }

inline std::string plans_path(const RunConfig& cfg, const std::string& preset) {
    return output_dir(cfg) + "/plans_" + detail::sanitize(preset) + ".jsonl";
}

inline std::string verdicts_path(const RunConfig& cfg, const std::string& method_x,
                                 const std::string& method_y) {
    return output_dir(cfg) + "/verdicts_" + detail::sanitize(method_x) + "_vs_" +
           detail::sanitize(method_y) + ".jsonl";
}

inline std::string analysis_path(const RunConfig& cfg, const std::string& method_x,
                                 const std::string& method_y) {
    return output_dir(cfg) + "/analysis_" + detail::sanitize(method_x) + "_vs_" +
           detail::sanitize(method_y) + ".json";
}

struct Workspace {
    corpus::CorpusStore store;
    std::vector<corpus::Question> questions;
};

inline Workspace load_workspace(const RunConfig& cfg) {
    Workspace w;
    w.store = corpus::load_corpus(cfg.resolve(cfg.chunks_path), cfg.resolve(cfg.embeddings_path),
                                  TokenCounter::by_name(cfg.token_counter));
    if (!cfg.question_embeddings_path.empty()) {
        auto table = corpus::load_embedding_table(cfg.resolve(cfg.question_embeddings_path));
        w.questions = corpus::load_questions(cfg.resolve(cfg.questions_path), &table);
    } else {
        w.questions = corpus::load_questions(cfg.resolve(cfg.questions_path));
    }
    return w;
}

inline std::vector<corpus::Question> load_questions_only(const RunConfig& cfg) {
    if (!cfg.question_embeddings_path.empty()) {
        auto table = corpus::load_embedding_table(cfg.resolve(cfg.question_embeddings_path));
        return corpus::load_questions(cfg.resolve(cfg.questions_path), &table);
    }
    return corpus::load_questions(cfg.resolve(cfg.questions_path));
}

// ---- validate ------------------------------------------------------------------

struct ValidationCheck {
    std::string name;
    std::string detail;
};

struct ValidationReport {
    std::string config_hash;
    std::vector<ValidationCheck> checks;
};

/// Full config audit. Any inconsistency throws a named error; success
/// returns one line per check performed.
inline ValidationReport cmd_validate(const RunConfig& cfg) {
    ValidationReport report;
    report.config_hash = cfg.config_hash;
    auto pass = [&](const std::string& name, const std::string& detail) {
        report.checks.push_back({name, detail});
    };

    auto require_file = [&](const std::string& label, const std::string& path) {
        if (path.empty())
            throw Error(ErrorCode::ValidationError, label + " path is not configured");
        const std::string full = cfg.resolve(path);
        if (!std::filesystem::exists(full))
            throw Error(ErrorCode::ValidationError, label + " file missing: " + full);
        pass(label + "_exists", full);
    };

    require_file("chunks", cfg.chunks_path);
    require_file("embeddings", cfg.embeddings_path);
    require_file("questions", cfg.questions_path);
    if (!cfg.question_embeddings_path.empty())
        require_file("question_embeddings", cfg.question_embeddings_path);
    if (!cfg.manifest_path.empty()) require_file("manifest", cfg.manifest_path);
    if (!cfg.judge_template_path.empty())
        require_file("judge_template", cfg.judge_template_path);
    for (const auto& [method, path] : cfg.answer_paths) require_file("answers_" + method, path);

    cfg.check_fixed_budget();
    pass("fixed_budget", "all arms run at " + std::to_string(cfg.budget_tokens) + " tokens");

    if (cfg.pool_k < 1)
        throw Error(ErrorCode::ValidationError, "pool_k must be >= 1");
    if (cfg.mmr_lambda < 0.0 || cfg.mmr_lambda > 1.0)
        throw Error(ErrorCode::ValidationError, "mmr_lambda must lie in [0,1]");
    pass("selection_params", "pool_k=" + std::to_string(cfg.pool_k));

    for (const auto& preset : cfg.presets) resolve_preset(preset, cfg);
    pass("presets", std::to_string(cfg.presets.size()) + " preset(s) resolvable");

    Workspace w = load_workspace(cfg);
    pass("corpus_loads", std::to_string(w.store.size()) + " chunks, dimension " +
                             std::to_string(w.store.dimension()));
    pass("questions_load", std::to_string(w.questions.size()) + " questions");

    for (const auto& q : w.questions) {
        if (q.query_embedding.size() != w.store.dimension())
            throw Error(ErrorCode::DimensionMismatch,
                        "question '" + q.question_id + "' embedding dimension " +
                            std::to_string(q.query_embedding.size()) + " vs corpus " +
                            std::to_string(w.store.dimension()));
        for (const auto& sub : q.subaspect_embeddings) {
            if (sub.size() != w.store.dimension())
                throw Error(ErrorCode::DimensionMismatch,
                            "question '" + q.question_id + "' subaspect dimension mismatch");
        }
    }
    pass("embedding_dimensions", "all question embeddings match the corpus dimension");

    if (!cfg.manifest_path.empty()) {
        auto manifest = corpus::load_manifest(cfg.resolve(cfg.manifest_path));
        std::vector<std::string> ids;
        ids.reserve(w.store.size());
        for (std::size_t i = 0; i < w.store.size(); ++i)
            ids.push_back(w.store.chunk_at(i).paper_id);
        auto vr = corpus::verify_manifest(manifest, ids);
        if (!vr.ok()) {
            std::string msg = "manifest verification failed:";
            for (const auto& id : vr.mismatched) msg += " mismatched=" + id;
            for (const auto& id : vr.missing) msg += " unlisted=" + id;
            throw Error(ErrorCode::ValidationError, msg);
        }
        pass("manifest", std::to_string(vr.matched.size()) + " paper digest(s) verified");
    }

    if (cfg.judge_backend != "mock" && cfg.judge_backend != "http")
        throw Error(ErrorCode::ValidationError,
                    "judge backend must be mock or http, got '" + cfg.judge_backend + "'");
    if (cfg.judge_backend == "http" && cfg.judge_endpoint.empty())
        throw Error(ErrorCode::ValidationError, "http judge needs [judge].endpoint");
    pass("judge_backend", cfg.judge_backend);

    return report;
}

// ---- ingest --------------------------------------------------------------------

struct IngestSummary {
    std::string method;
    std::size_t count = 0;
    std::vector<std::string> unknown_questions;
    std::string path; // normalized artifact
};

/// Copy external answer files into the run directory in normalized form:
/// schema-tagged, char lengths verified, records sorted by question id.
/// Answers are only ever ingested; nothing in this toolkit generates them.
inline std::vector<IngestSummary> cmd_ingest(const RunConfig& cfg) {
    if (cfg.answer_paths.empty())
        throw Error(ErrorCode::ConfigurationError, "no [answers] entries to ingest");
    auto questions = load_questions_only(cfg);
    std::unordered_set<std::string> known;
    for (const auto& q : questions) known.insert(q.question_id);

    ensure_output_dir(cfg);
    std::vector<IngestSummary> summaries;
    std::vector<nlohmann::json> report_rows;
    for (const auto& [method, path] : cfg.answer_paths) {
        auto file = artifact::read_jsonl(cfg.resolve(path), artifact::SCHEMA_ANSWERS);
        std::vector<judging::AnswerRecord> records;
        std::unordered_set<std::string> seen;
        for (const auto& rec : file.records) {
            auto a = artifact::answer_from_json(rec);
            if (a.method != method)
                throw Error(ErrorCode::ValidationError,
                            "answer for method '" + a.method + "' in the '" + method +
                                "' file " + path);
            if (!seen.insert(a.question_id).second)
                throw Error(ErrorCode::DuplicateId,
                            "duplicate answer for question '" + a.question_id + "' method '" +
                                method + "'");
            records.push_back(std::move(a));
        }
        std::sort(records.begin(), records.end(),
                  [](const judging::AnswerRecord& a, const judging::AnswerRecord& b) {
                      return a.question_id < b.question_id;
                  });

        IngestSummary s;
        s.method = method;
        s.count = records.size();
        for (const auto& a : records)
            if (!known.count(a.question_id)) s.unknown_questions.push_back(a.question_id);
        s.path = answers_path(cfg, method);

        std::vector<nlohmann::json> rows;
        rows.reserve(records.size());
        for (const auto& a : records) rows.push_back(artifact::answer_to_json(a));
        nlohmann::json header;
        header["config_hash"] = cfg.config_hash;
        header["method"] = method;
        header["count"] = records.size();
        artifact::write_jsonl(s.path, header, rows, artifact::SCHEMA_ANSWERS);

        nlohmann::json row;
        row["method"] = method;
        row["count"] = s.count;
        row["unknown_questions"] = s.unknown_questions;
        row["artifact"] = s.path;
        report_rows.push_back(std::move(row));
        summaries.push_back(std::move(s));
    }

    nlohmann::json doc;
    doc["schema"] = artifact::SCHEMA_INGEST;
    doc["config_hash"] = cfg.config_hash;
    doc["methods"] = report_rows;
    artifact::write_json(output_dir(cfg) + "/ingest.json", doc);
    return summaries;
}

// ---- pool ----------------------------------------------------------------------

/// Materialise the shared candidate pool per question, the common search
/// space every selector draws from.
inline std::string cmd_pool(const RunConfig& cfg) {
    Workspace w = load_workspace(cfg);
    ensure_output_dir(cfg);
    std::vector<nlohmann::json> rows;
    rows.reserve(w.questions.size());
    for (const auto& q : w.questions) {
        auto pool = corpus::build_candidate_pool(q, w.store, cfg.pool_k);
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : pool.entries) {
            nlohmann::json item;
            item["chunk_id"] = e.chunk_id;
            item["query_similarity"] = e.query_similarity;
            entries.push_back(std::move(item));
        }
        nlohmann::json row;
        row["question_id"] = q.question_id;
        row["entries"] = std::move(entries);
        rows.push_back(std::move(row));
    }
    nlohmann::json header;
    header["config_hash"] = cfg.config_hash;
    header["pool_k"] = cfg.pool_k;
    const std::string path = pools_path(cfg);
    artifact::write_jsonl(path, header, rows, artifact::SCHEMA_POOLS);
    return path;
}

// ---- select --------------------------------------------------------------------

/// One evidence plan per question for the preset. Per-question failures are
/// recorded in the artifact and do not abort the run. Deterministic under
/// the configured seed.
inline std::string cmd_select(const RunConfig& cfg, const std::string& preset_name,
                              std::optional<std::uint64_t> seed_override = {}) {
    SelectorPreset preset = resolve_preset(preset_name, cfg);
    if (seed_override) preset.brkga.seed = *seed_override;
    Workspace w = load_workspace(cfg);
    ensure_output_dir(cfg);

    std::vector<nlohmann::json> rows;
    rows.reserve(w.questions.size());
    for (const auto& q : w.questions) {
        nlohmann::json row;
        row["question_id"] = q.question_id;
        row["selector"] = preset.name;
        try {
            fitness::EvidencePlan plan;
            nlohmann::json trace_json;
            std::size_t pool_size = 0;
            if (preset.kind == SelectorPreset::Kind::Evolved) {
                brkga::PoolScorer scorer;
                if (preset.weights.zeta != 0.0) {
                    scorer = [&](const corpus::CandidatePool& pool) {
                        auto index = baselines::build_pool_index(pool, w.store);
                        return baselines::pool_scores(index, q.text, pool);
                    };
                }
                auto outcome =
                    brkga::select_gadmec(q, w.store, preset.brkga, preset.weights,
                                         cfg.pool_k, scorer);
                plan = std::move(outcome.plan);
                pool_size = outcome.pool_size;
                trace_json["generations"] = outcome.trace.generations.size();
                trace_json["fitness_evaluations"] = outcome.trace.fitness_evaluations;
                trace_json["best_generation"] = outcome.trace.best_generation;
                trace_json["stopped_by_stagnation"] = outcome.trace.stopped_by_stagnation;
            } else {
                auto pool = corpus::build_candidate_pool(q, w.store, cfg.pool_k);
                auto ctx = fitness::make_context(pool, w.store, q, cfg.budget_tokens);
                pool_size = pool.entries.size();
                switch (preset.kind) {
                    case SelectorPreset::Kind::Greedy:
                        plan = baselines::greedy_select(ctx, cfg.budget_tokens);
                        break;
                    case SelectorPreset::Kind::Mmr:
                        plan = baselines::mmr_select(ctx, cfg.budget_tokens, cfg.mmr_lambda);
                        break;
                    default: {
                        auto index = baselines::build_pool_index(pool, w.store);
                        plan = baselines::bm25_select(ctx, index, q.text, cfg.budget_tokens);
                        break;
                    }
                }
            }

            // The recorded breakdown always uses the full default weights, so
            // ablation arms stay comparable on the same scale.
            auto pool = corpus::build_candidate_pool(q, w.store, cfg.pool_k);
            auto ctx = fitness::make_context(pool, w.store, q, cfg.budget_tokens);
            fitness::FitnessWeights score_weights = cfg.weights;
            score_weights.zeta = 0.0;
            auto b = fitness::breakdown(plan, ctx, score_weights);

            row["plan"] = artifact::plan_to_json(plan, preset.name);
            row["pool_size"] = pool_size;
            nlohmann::json bj;
            bj["coverage"] = b.cov;
            bj["diversity"] = b.div;
            bj["cost"] = b.cost;
            bj["coherence"] = b.coh;
            bj["subaspect"] = b.sub;
            bj["total"] = b.total;
            row["fitness"] = bj;
            if (!trace_json.is_null()) row["trace"] = trace_json;
        } catch (const Error& e) {
            row["error"] = error_code_name(e.code());
            row["error_detail"] = e.what();
        }
        rows.push_back(std::move(row));
    }

    nlohmann::json header;
    header["config_hash"] = cfg.config_hash;
    header["selector"] = preset.name;
    header["seed"] = preset.brkga.seed;
    header["budget_tokens"] = cfg.budget_tokens;
    const std::string path = plans_path(cfg, preset.name);
    artifact::write_jsonl(path, header, rows, artifact::SCHEMA_PLANS);
    return path;
}

// ---- judge ---------------------------------------------------------------------

inline std::vector<judging::AnswerRecord> load_ingested_answers(const RunConfig& cfg,
                                                                const std::string& method) {
    const std::string path = answers_path(cfg, method);
    if (!std::filesystem::exists(path))
        throw Error(ErrorCode::IoError,
                    "no ingested answers for '" + method + "'; run ingest first");
    auto file = artifact::read_jsonl(path, artifact::SCHEMA_ANSWERS);
    std::vector<judging::AnswerRecord> out;
    out.reserve(file.records.size());
    for (const auto& rec : file.records) out.push_back(artifact::answer_from_json(rec));
    return out;
}

inline std::unique_ptr<judging::JudgeBackend> make_backend(const RunConfig& cfg,
                                                           const std::string& backend_override,
                                                           const std::string& method_x) {
    const std::string kind = backend_override.empty() ? cfg.judge_backend : backend_override;
    if (kind == "mock") {
        judging::MockJudge::Params params;
        if (cfg.mock_policy == "longer_wins") {
            params.policy = judging::MockPolicy::LongerWins;
        } else if (cfg.mock_policy == "higher_jaccard_with_reference") {
            params.policy = judging::MockPolicy::HigherJaccardWithReference;
        } else if (cfg.mock_policy == "seeded_random") {
            params.policy = judging::MockPolicy::SeededRandom;
        } else {
            throw Error(ErrorCode::ConfigurationError,
                        "unknown mock policy '" + cfg.mock_policy + "'");
        }
        params.p_tie = cfg.mock_p_tie;
        params.win_rate = cfg.mock_win_rate;
        params.focal_method = cfg.mock_focal.empty() ? method_x : cfg.mock_focal;
        params.seed = cfg.judge_seed;
        params.judge_id = cfg.judge_id.empty() ? "mock" : cfg.judge_id;
        return judging::mock_judge(params);
    }
    if (kind == "http") {
        judging::HttpJudgeConfig hc;
        hc.endpoint = cfg.judge_endpoint;
        hc.auth_env = cfg.judge_auth_env;
        hc.timeout_seconds = static_cast<int>(cfg.judge_timeout_seconds);
        hc.rate_per_minute = static_cast<int>(cfg.judge_rate_per_minute);
        hc.judge_id = cfg.judge_id.empty() ? "http" : cfg.judge_id;
        return std::make_unique<judging::HttpJudge>(hc);
    }
    throw Error(ErrorCode::ConfigurationError, "unknown judge backend '" + kind + "'");
}

/// Blinded pairwise judging for one comparison. Reads ingested answers,
/// writes one verdict per question that has both arms' answers, sorted by
/// pair id, with the prompt template digest in the header.
inline std::string cmd_judge(const RunConfig& cfg, const std::string& method_x,
                             const std::string& method_y,
                             const std::string& backend_override = "",
                             unsigned concurrency_override = 0,
                             std::optional<std::uint64_t> seed_override = {}) {
    auto questions = load_questions_only(cfg);
    auto answers = load_ingested_answers(cfg, method_x);
    auto answers_y = load_ingested_answers(cfg, method_y);
    answers.insert(answers.end(), answers_y.begin(), answers_y.end());

    const std::string template_text = artifact::read_text(cfg.resolve(cfg.judge_template_path));
    std::string template_id = std::filesystem::path(cfg.judge_template_path).stem().string();
    if (template_id.empty()) template_id = "judge_prompt";

    auto backend = make_backend(cfg, backend_override, method_x);
    const unsigned concurrency = concurrency_override > 0
                                     ? concurrency_override
                                     : static_cast<unsigned>(cfg.judge_concurrency);
    const std::uint64_t run_seed = seed_override ? *seed_override : cfg.judge_seed;

    auto reference = [](const corpus::Question& q) { return q.text; };
    auto result = judging::run_comparison(method_x, method_y, questions, answers, *backend,
                                          run_seed, template_id, concurrency, {}, reference);

    std::vector<nlohmann::json> rows;
    rows.reserve(result.verdicts.size());
    for (const auto& v : result.verdicts) rows.push_back(artifact::verdict_to_json(v));

    nlohmann::json header;
    header["config_hash"] = cfg.config_hash;
    header["method_x"] = method_x;
    header["method_y"] = method_y;
    header["judge_id"] = backend->id();
    header["template_id"] = template_id;
    header["template_sha256"] = sha256_hex(template_text);
    header["seed"] = run_seed;
    header["missing_x"] = result.missing_x;
    header["missing_y"] = result.missing_y;
    ensure_output_dir(cfg);
    const std::string path = verdicts_path(cfg, method_x, method_y);
    artifact::write_jsonl(path, header, rows, artifact::SCHEMA_VERDICTS);
    return path;
}

// ---- analyze -------------------------------------------------------------------

struct ComparisonInputs {
    std::string method_x;
    std::string method_y;
    std::vector<judging::VerdictRecord> verdicts;
    nlohmann::json header;
};

inline ComparisonInputs read_verdicts_file(const std::string& path) {
    auto file = artifact::read_jsonl(path, artifact::SCHEMA_VERDICTS);
    ComparisonInputs in;
    in.header = file.header;
    in.method_x = file.header.value("method_x", std::string{});
    in.method_y = file.header.value("method_y", std::string{});
    if (in.method_x.empty() || in.method_y.empty())
        throw Error(ErrorCode::ValidationError, path + ": header lacks method_x/method_y");
    for (const auto& rec : file.records)
        in.verdicts.push_back(artifact::verdict_from_json(rec));
    return in;
}

inline stats::ClusteredOutcomes outcomes_from_verdicts(
    const std::vector<judging::VerdictRecord>& verdicts, const std::string& method_x,
    std::size_t* n_ties = nullptr, std::size_t* n_skips = nullptr) {
    std::vector<std::pair<std::string, int>> labeled;
    std::size_t ties = 0, skips = 0;
    for (const auto& v : verdicts) {
        if (v.flagged_skip) {
            ++skips;
            continue;
        }
        if (v.winner_method.empty()) {
            ++ties;
            continue;
        }
        labeled.emplace_back(v.combination_id, v.winner_method == method_x ? 1 : 0);
    }
    if (n_ties) *n_ties = ties;
    if (n_skips) *n_skips = skips;
    if (labeled.empty())
        throw Error(ErrorCode::EmptyOutcomes, "no decisive verdicts to analyze");
    return stats::ClusteredOutcomes::from_pairs(labeled);
}

namespace detail {

inline nlohmann::json test_result_json(const stats::TestResult& r) {
    nlohmann::json j;
    j["method"] = stats::test_method_tag(r.method);
    j["p_value"] = r.p_value;
    j["statistic"] = r.statistic;
    j["replicates"] = r.replicates;
    j["exact"] = r.exact;
    if (r.has_ci) {
        j["ci_low"] = r.ci_low;
        j["ci_high"] = r.ci_high;
    }
    return j;
}

inline nlohmann::json win_rate_block_json(const diag::WinRateBlock& b) {
    nlohmann::json j;
    j["n_pairs"] = b.n_pairs;
    j["n_ties"] = b.n_ties;
    j["n_effective"] = b.n_effective;
    j["n_clusters"] = b.n_clusters;
    if (b.win_rate) j["win_rate"] = *b.win_rate;
    j["ci_available"] = b.ci_available;
    if (b.ci_available) {
        j["ci_low"] = b.ci_low;
        j["ci_high"] = b.ci_high;
    }
    return j;
}

inline nlohmann::json diagnostics_json(const std::vector<diag::JoinedPair>& joined,
                                       const RunConfig& cfg) {
    nlohmann::json out;

    nlohmann::json bins = nlohmann::json::array();
    for (const auto& row : diag::bin_sensitivity_sweep(joined, diag::default_bin_widths(),
                                                       cfg.bootstrap_replicates,
                                                       cfg.analysis_seed)) {
        nlohmann::json r;
        if (row.width) r["bin_width"] = *row.width;
        else r["bin_width"] = "all";
        r["block"] = win_rate_block_json(row.block);
        bins.push_back(std::move(r));
    }
    out["length_bins"] = std::move(bins);

    auto slices = diag::content_distance_slices(joined, diag::DistanceMetric::Jaccard, 4,
                                                cfg.bootstrap_replicates, cfg.analysis_seed);
    nlohmann::json sj;
    sj["metric"] = "jaccard";
    sj["analyzed"] = slices.analyzed;
    sj["degenerate_metric"] = slices.degenerate_metric;
    sj["boundaries"] = slices.boundaries;
    nlohmann::json sr = nlohmann::json::array();
    for (const auto& row : slices.rows) {
        nlohmann::json r;
        r["slice"] = row.index;
        r["block"] = win_rate_block_json(row.block);
        sr.push_back(std::move(r));
    }
    sj["rows"] = std::move(sr);
    out["content_slices"] = std::move(sj);

    nlohmann::json combos = nlohmann::json::array();
    for (const auto& row : diag::per_combination_winrates(joined)) {
        nlohmann::json r;
        r["combination_id"] = row.combination_id;
        r["regime"] = corpus::regime_label(row.regime);
        r["n_pairs"] = row.n_pairs;
        r["n_ties"] = row.n_ties;
        r["wins"] = row.wins;
        if (row.win_rate) r["win_rate"] = *row.win_rate;
        combos.push_back(std::move(r));
    }
    out["combinations"] = std::move(combos);

    nlohmann::json regimes = nlohmann::json::array();
    for (const auto& row : diag::regime_stratification(joined, cfg.bootstrap_replicates,
                                                       cfg.analysis_seed)) {
        nlohmann::json r;
        r["regime"] = corpus::regime_label(row.regime);
        r["block"] = win_rate_block_json(row.block);
        regimes.push_back(std::move(r));
    }
    out["regimes"] = std::move(regimes);
    return out;
}

} // namespace detail

/// Full inference for one comparison plus the Bonferroni ledger across all
/// comparisons passed in together. Returns the paths written (one analysis
/// file per comparison plus the family ledger).
inline std::vector<std::string> cmd_analyze(const RunConfig& cfg,
                                            const std::vector<std::string>& verdict_paths) {
    if (verdict_paths.empty())
        throw Error(ErrorCode::ConfigurationError, "no verdict files to analyze");

    auto questions = load_questions_only(cfg);
    ensure_output_dir(cfg);

    struct PerComparison {
        ComparisonInputs in;
        nlohmann::json doc;
        double family_p = 1.0;
    };
    std::vector<PerComparison> all;

    for (const auto& path : verdict_paths) {
        PerComparison pc;
        pc.in = read_verdicts_file(path);
        const std::string& mx = pc.in.method_x;

        std::size_t n_ties = 0, n_skips = 0;
        auto outcomes = outcomes_from_verdicts(pc.in.verdicts, mx, &n_ties, &n_skips);

        nlohmann::json doc;
        doc["schema"] = artifact::SCHEMA_ANALYSIS;
        doc["kind"] = "comparison";
        doc["config_hash"] = cfg.config_hash;
        doc["status"] = cfg.analysis_status;
        doc["method_x"] = pc.in.method_x;
        doc["method_y"] = pc.in.method_y;
        doc["judge_id"] = pc.in.header.value("judge_id", std::string{});
        doc["n_pairs"] = pc.in.verdicts.size();
        doc["n_ties"] = n_ties;
        doc["n_skips"] = n_skips;
        doc["n_effective"] = outcomes.n_pairs();
        doc["n_clusters"] = outcomes.n_clusters();
        doc["win_rate"] = stats::win_rate(outcomes);

        doc["binomial"] = detail::test_result_json(stats::binomial_p(outcomes));

        bool have_vanilla = false;
        try {
            auto v = stats::cluster_bootstrap(outcomes, cfg.bootstrap_replicates,
                                              stats::Side::Greater, cfg.analysis_seed);
            doc["vanilla_bootstrap"] = detail::test_result_json(v);
            have_vanilla = true;
        } catch (const Error& e) {
            doc["vanilla_bootstrap"] = {{"skipped", error_code_name(e.code())}};
        }
        (void)have_vanilla;

        auto permutation = stats::sign_flip_permutation(outcomes, stats::Side::Greater,
                                                        cfg.permutation_max_exact,
                                                        cfg.permutation_sampled,
                                                        cfg.analysis_seed);
        doc["permutation"] = detail::test_result_json(permutation);

        double primary_p;
        try {
            auto wld = stats::wild_cluster_bootstrap(outcomes, cfg.wild_replicates, 0.5,
                                                     stats::Side::Greater, cfg.analysis_seed);
            doc["wild_bootstrap"] = detail::test_result_json(wld);
            doc["wild_fallback_permutation"] = false;
            primary_p = wld.p_value;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateVariance) throw;
            doc["wild_bootstrap"] = {{"skipped", error_code_name(e.code())}};
            doc["wild_fallback_permutation"] = true;
            primary_p = permutation.p_value;
        }
        doc["primary_p"] = primary_p;
        pc.family_p = primary_p;

        const std::string ax = answers_path(cfg, pc.in.method_x);
        const std::string ay = answers_path(cfg, pc.in.method_y);
        if (std::filesystem::exists(ax) && std::filesystem::exists(ay)) {
            auto answers = load_ingested_answers(cfg, pc.in.method_x);
            auto ys = load_ingested_answers(cfg, pc.in.method_y);
            answers.insert(answers.end(), ys.begin(), ys.end());
            auto joined = diag::joined_pairs(pc.in.verdicts, answers, questions, mx);
            doc["diagnostics"] = detail::diagnostics_json(joined, cfg);
        }

        pc.doc = std::move(doc);
        all.push_back(std::move(pc));
    }

    std::vector<double> family_p;
    family_p.reserve(all.size());
    for (const auto& pc : all) family_p.push_back(pc.family_p);
    auto decisions = stats::bonferroni_family(family_p, cfg.family_alpha);

    std::vector<std::string> written;
    nlohmann::json ledger_rows = nlohmann::json::array();
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& pc = all[i];
        nlohmann::json mark;
        mark["p_value"] = decisions[i].p_value;
        mark["corrected_alpha"] = decisions[i].corrected_alpha;
        mark["mark"] = stats::family_mark_symbol(decisions[i].mark);
        pc.doc["family_decision"] = mark;

        const std::string path = analysis_path(cfg, pc.in.method_x, pc.in.method_y);
        artifact::write_json(path, pc.doc);
        written.push_back(path);

        nlohmann::json row;
        row["comparison"] = pc.in.method_x + " vs " + pc.in.method_y;
        row["p_value"] = decisions[i].p_value;
        row["mark"] = stats::family_mark_symbol(decisions[i].mark);
        ledger_rows.push_back(std::move(row));
    }

    nlohmann::json family;
    family["schema"] = artifact::SCHEMA_ANALYSIS;
    family["kind"] = "family";
    family["config_hash"] = cfg.config_hash;
    family["status"] = cfg.analysis_status;
    family["family_alpha"] = cfg.family_alpha;
    family["m"] = all.size();
    family["corrected_alpha"] = cfg.family_alpha / static_cast<double>(all.size());
    family["tests"] = ledger_rows;
    const std::string family_path = output_dir(cfg) + "/analysis_family.json";
    artifact::write_json(family_path, family);
    written.push_back(family_path);
    return written;
}

// ---- agree ---------------------------------------------------------------------

/// Inter-judge agreement between two verdict files for the same comparison.
inline std::string cmd_agree(const RunConfig& cfg, const std::string& verdicts_a,
                             const std::string& verdicts_b) {
    auto a = read_verdicts_file(verdicts_a);
    auto b = read_verdicts_file(verdicts_b);
    if (a.method_x != b.method_x || a.method_y != b.method_y)
        throw Error(ErrorCode::ValidationError,
                    "the two verdict files cover different comparisons");

    auto category = [&](const judging::VerdictRecord& v) {
        if (v.winner_method == a.method_x) return agreement::Category::MethodXWins;
        if (v.winner_method == a.method_y) return agreement::Category::MethodYWins;
        return agreement::Category::Tie;
    };

    std::unordered_map<std::string, const judging::VerdictRecord*> by_pair;
    for (const auto& v : b.verdicts)
        if (!v.flagged_skip) by_pair[v.pair_id] = &v;

    agreement::PairedVerdicts pv;
    for (const auto& v : a.verdicts) {
        if (v.flagged_skip) continue;
        auto it = by_pair.find(v.pair_id);
        if (it == by_pair.end()) continue;
        pv.pair_ids.push_back(v.pair_id);
        pv.judge1.push_back(category(v));
        pv.judge2.push_back(category(*it->second));
    }

    auto decisive_wr = [&](const std::vector<judging::VerdictRecord>& vs) -> nlohmann::json {
        std::size_t wins = 0, eff = 0;
        for (const auto& v : vs) {
            if (v.flagged_skip || v.winner_method.empty()) continue;
            ++eff;
            if (v.winner_method == a.method_x) ++wins;
        }
        nlohmann::json j;
        j["n_effective"] = eff;
        if (eff > 0) j["win_rate"] = static_cast<double>(wins) / static_cast<double>(eff);
        return j;
    };

    nlohmann::json doc;
    doc["schema"] = artifact::SCHEMA_AGREEMENT;
    doc["config_hash"] = cfg.config_hash;
    doc["method_x"] = a.method_x;
    doc["method_y"] = a.method_y;
    doc["judge_1"] = a.header.value("judge_id", std::string{});
    doc["judge_2"] = b.header.value("judge_id", std::string{});
    doc["n_shared"] = pv.n_shared();
    doc["judge_1_win_rate"] = decisive_wr(a.verdicts);
    doc["judge_2_win_rate"] = decisive_wr(b.verdicts);

    auto metric = [&](const char* key, auto&& fn) {
        try {
            doc[key] = fn();
        } catch (const Error& e) {
            doc[key] = nullptr;
            doc[std::string(key) + "_skipped"] = error_code_name(e.code());
        }
    };
    metric("raw_agreement", [&] { return agreement::raw_agreement(pv); });
    metric("kappa", [&] { return agreement::cohens_kappa(pv); });
    metric("ac1", [&] { return agreement::gwet_ac1(pv); });
    metric("kappa_binary", [&] { return agreement::cohens_kappa(pv, true); });
    metric("ac1_binary", [&] { return agreement::gwet_ac1(pv, true); });
    doc["n_binary"] = pv.without_ties().n_shared();

    ensure_output_dir(cfg);
    const std::string path = output_dir(cfg) + "/agreement_" +
                             detail::sanitize(a.method_x) + "_vs_" +
                             detail::sanitize(a.method_y) + ".json";
    artifact::write_json(path, doc);
    return path;
}

// ---- report --------------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string opt_number(const nlohmann::json& j, const char* key, int digits = 4) {
    if (!j.contains(key) || j[key].is_null()) return "";
    return fixed(j[key].get<double>(), digits);
}

inline std::string p_cell(const nlohmann::json& test) {
    if (!test.is_object() || !test.contains("p_value")) return "skipped";
    return fixed(test["p_value"].get<double>(), 4);
}

} // namespace detail

/// Human-readable summary plus CSV exports. Classifies the given analysis
/// files by their "kind" field; unknown files are rejected. Byte-stable for
/// fixed input files.
inline std::string cmd_report(const RunConfig& cfg,
                              const std::vector<std::string>& analysis_paths) {
    ensure_output_dir(cfg);
    const std::string csv_dir = output_dir(cfg) + "/csv";
    std::filesystem::create_directories(csv_dir);

    std::vector<nlohmann::json> comparisons;
    nlohmann::json family;
    std::vector<nlohmann::json> agreements;
    for (const auto& path : analysis_paths) {
        auto doc = artifact::read_json(path);
        const std::string schema = doc.value("schema", std::string{});
        if (schema == artifact::SCHEMA_AGREEMENT) {
            agreements.push_back(std::move(doc));
            continue;
        }
        if (schema != artifact::SCHEMA_ANALYSIS)
            throw Error(ErrorCode::ValidationError, path + ": not an analysis artifact");
        const std::string kind = doc.value("kind", std::string{});
        if (kind == "comparison") comparisons.push_back(std::move(doc));
        else if (kind == "family") family = std::move(doc);
        else throw Error(ErrorCode::ValidationError, path + ": unknown analysis kind");
    }
    std::sort(comparisons.begin(), comparisons.end(),
              [](const nlohmann::json& x, const nlohmann::json& y) {
                  auto key = [](const nlohmann::json& j) {
                      return j.value("method_x", std::string{}) + "|" +
                             j.value("method_y", std::string{});
                  };
                  return key(x) < key(y);
              });

    std::string md;
    md += "# Comparison report\n\n";
    md += "Config hash: `" + cfg.config_hash + "`\n\n";
    md += "Analysis status: " + cfg.analysis_status + "\n\n";

    if (comparisons.empty()) {
        md += "Warning: no comparison analyses supplied; nothing to report.\n";
        const std::string path = output_dir(cfg) + "/report.md";
        artifact::write_text(path, md);
        return path;
    }

    md += "## Pairwise comparisons\n\n";
    md += "| comparison | n | ties | skips | WR | binomial p | vanilla p | wild p | "
          "permutation p | 95% CI | mark |\n";
    md += "|---|---|---|---|---|---|---|---|---|---|---|\n";

    std::string csv = "comparison,n_pairs,n_ties,n_skips,n_effective,n_clusters,win_rate,"
                      "binomial_p,vanilla_p,wild_p,permutation_p,ci_low,ci_high,mark\n";
    for (const auto& c : comparisons) {
        const std::string name =
            c.value("method_x", std::string{}) + " vs " + c.value("method_y", std::string{});
        const std::string wr = detail::opt_number(c, "win_rate");
        std::string ci = "";
        if (c.contains("vanilla_bootstrap") && c["vanilla_bootstrap"].contains("ci_low")) {
            ci = "[" + detail::fixed(c["vanilla_bootstrap"]["ci_low"].get<double>(), 4) + ", " +
                 detail::fixed(c["vanilla_bootstrap"]["ci_high"].get<double>(), 4) + "]";
        }
        std::string mark;
        if (c.contains("family_decision"))
            mark = c["family_decision"].value("mark", std::string{});
        const std::string wild_p = c.value("wild_fallback_permutation", false)
                                       ? detail::p_cell(c["permutation"]) + " (fallback)"
                                       : detail::p_cell(c["wild_bootstrap"]);

        md += "| " + name + " | " + std::to_string(c.value("n_pairs", 0)) + " | " +
              std::to_string(c.value("n_ties", 0)) + " | " +
              std::to_string(c.value("n_skips", 0)) + " | " + wr + " | " +
              detail::p_cell(c["binomial"]) + " | " + detail::p_cell(c["vanilla_bootstrap"]) +
              " | " + wild_p + " | " + detail::p_cell(c["permutation"]) + " | " + ci + " | " +
              mark + " |\n";

        csv += detail::csv_escape(name) + "," + std::to_string(c.value("n_pairs", 0)) + "," +
               std::to_string(c.value("n_ties", 0)) + "," +
               std::to_string(c.value("n_skips", 0)) + "," +
               std::to_string(c.value("n_effective", 0)) + "," +
               std::to_string(c.value("n_clusters", 0)) + "," + wr + "," +
               detail::p_cell(c["binomial"]) + "," + detail::p_cell(c["vanilla_bootstrap"]) +
               "," + detail::p_cell(c["wild_bootstrap"]) + "," +
               detail::p_cell(c["permutation"]) + "," +
               (c.contains("vanilla_bootstrap") && c["vanilla_bootstrap"].contains("ci_low")
                    ? detail::fixed(c["vanilla_bootstrap"]["ci_low"].get<double>(), 4)
                    : "") +
               "," +
               (c.contains("vanilla_bootstrap") && c["vanilla_bootstrap"].contains("ci_high")
                    ? detail::fixed(c["vanilla_bootstrap"]["ci_high"].get<double>(), 4)
                    : "") +
               "," + mark + "\n";
    }
    artifact::write_text(csv_dir + "/comparisons.csv", csv);
    md += "\nMarks: ★ significant after Bonferroni correction, • significant uncorrected only, "
          "× not significant.\n";

    if (!family.is_null()) {
        md += "\n## Test family\n\n";
        md += "Family alpha " + detail::fixed(family.value("family_alpha", 0.0), 4) +
              " over m=" + std::to_string(family.value("m", 0)) +
              " tests; corrected alpha " +
              detail::fixed(family.value("corrected_alpha", 0.0), 6) + ".\n";
    }

    for (const auto& c : comparisons) {
        if (!c.contains("diagnostics")) continue;
        const std::string name =
            c.value("method_x", std::string{}) + " vs " + c.value("method_y", std::string{});
        const std::string slug = detail::sanitize(c.value("method_x", std::string{})) + "_vs_" +
                                 detail::sanitize(c.value("method_y", std::string{}));
        const auto& d = c["diagnostics"];

        md += "\n## Diagnostics: " + name + "\n";

        md += "\n### Win rate by length-matched bin\n\n";
        md += "| bin | n effective | WR | 95% CI |\n|---|---|---|---|\n";
        std::string bins_csv = "bin_width,n_pairs,n_ties,n_effective,win_rate,ci_low,ci_high\n";
        for (const auto& row : d["length_bins"]) {
            const auto& blk = row["block"];
            const std::string label = row["bin_width"].is_string()
                                          ? std::string("all")
                                          : "<= " + std::to_string(
                                                        row["bin_width"].get<long long>());
            std::string ci;
            if (blk.value("ci_available", false))
                ci = "[" + detail::fixed(blk["ci_low"].get<double>(), 4) + ", " +
                     detail::fixed(blk["ci_high"].get<double>(), 4) + "]";
            md += "| " + label + " | " + std::to_string(blk.value("n_effective", 0)) + " | " +
                  detail::opt_number(blk, "win_rate") + " | " + ci + " |\n";
            bins_csv += (row["bin_width"].is_string()
                             ? std::string("all")
                             : std::to_string(row["bin_width"].get<long long>())) +
                        "," + std::to_string(blk.value("n_pairs", 0)) + "," +
                        std::to_string(blk.value("n_ties", 0)) + "," +
                        std::to_string(blk.value("n_effective", 0)) + "," +
                        detail::opt_number(blk, "win_rate") + "," +
                        detail::opt_number(blk, "ci_low") + "," +
                        detail::opt_number(blk, "ci_high") + "\n";
        }
        artifact::write_text(csv_dir + "/bins_" + slug + ".csv", bins_csv);

        md += "\n### Win rate by lexical-overlap quartile\n\n";
        md += "| slice | n effective | WR |\n|---|---|---|\n";
        std::string slice_csv = "slice,n_pairs,n_ties,n_effective,win_rate\n";
        for (const auto& row : d["content_slices"]["rows"]) {
            const auto& blk = row["block"];
            const std::string label =
                "Q" + std::to_string(row["slice"].get<long long>() + 1) +
                (row["slice"].get<long long>() == 0 ? " (most distinct)" : "");
            md += "| " + label + " | " + std::to_string(blk.value("n_effective", 0)) + " | " +
                  detail::opt_number(blk, "win_rate") + " |\n";
            slice_csv += std::to_string(row["slice"].get<long long>()) + "," +
                         std::to_string(blk.value("n_pairs", 0)) + "," +
                         std::to_string(blk.value("n_ties", 0)) + "," +
                         std::to_string(blk.value("n_effective", 0)) + "," +
                         detail::opt_number(blk, "win_rate") + "\n";
        }
        artifact::write_text(csv_dir + "/slices_" + slug + ".csv", slice_csv);

        md += "\n### Win rate by corpus regime\n\n";
        md += "| regime | n effective | WR | 95% CI |\n|---|---|---|---|\n";
        for (const auto& row : d["regimes"]) {
            const auto& blk = row["block"];
            std::string ci;
            if (blk.value("ci_available", false))
                ci = "[" + detail::fixed(blk["ci_low"].get<double>(), 4) + ", " +
                     detail::fixed(blk["ci_high"].get<double>(), 4) + "]";
            md += "| " + row["regime"].get<std::string>() + " | " +
                  std::to_string(blk.value("n_effective", 0)) + " | " +
                  detail::opt_number(blk, "win_rate") + " | " + ci + " |\n";
        }

        std::string combo_csv = "combination_id,regime,n_pairs,n_ties,wins,win_rate\n";
        for (const auto& row : d["combinations"]) {
            combo_csv += detail::csv_escape(row["combination_id"].get<std::string>()) + "," +
                         row["regime"].get<std::string>() + "," +
                         std::to_string(row.value("n_pairs", 0)) + "," +
                         std::to_string(row.value("n_ties", 0)) + "," +
                         std::to_string(row.value("wins", 0ll)) + "," +
                         detail::opt_number(row, "win_rate") + "\n";
        }
        artifact::write_text(csv_dir + "/combinations_" + slug + ".csv", combo_csv);
    }

    if (!agreements.empty()) {
        md += "\n## Inter-judge agreement\n\n";
        md += "| comparison | judges | n shared | raw | kappa | AC1 | kappa (binary) | AC1 "
              "(binary) |\n|---|---|---|---|---|---|---|---|\n";
        for (const auto& g : agreements) {
            md += "| " + g.value("method_x", std::string{}) + " vs " +
                  g.value("method_y", std::string{}) + " | " +
                  g.value("judge_1", std::string{}) + " / " +
                  g.value("judge_2", std::string{}) + " | " +
                  std::to_string(g.value("n_shared", 0)) + " | " +
                  detail::opt_number(g, "raw_agreement") + " | " +
                  detail::opt_number(g, "kappa") + " | " + detail::opt_number(g, "ac1") +
                  " | " + detail::opt_number(g, "kappa_binary") + " | " +
                  detail::opt_number(g, "ac1_binary") + " |\n";
        }
    }

    const std::string path = output_dir(cfg) + "/report.md";
    artifact::write_text(path, md);
    return path;
}

} // namespace gadmec::run
