#pragma once

// JSON-lines artifacts. Every file starts with a header record carrying a
// versioned schema tag and the config hash of the run that produced it;
// readers reject files whose schema does not match. nlohmann::json keeps
// object keys sorted, so serialisation is canonical and reruns are
// byte-comparable.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gadmec/corpus.hpp"
#include "gadmec/error.hpp"
#include "gadmec/fitness.hpp"
#include "gadmec/judging.hpp"

namespace gadmec::artifact {

inline constexpr const char* SCHEMA_POOLS = "gadmec/pools/v1";
inline constexpr const char* SCHEMA_PLANS = "gadmec/plans/v1";
inline constexpr const char* SCHEMA_ANSWERS = "gadmec/answers/v1";
inline constexpr const char* SCHEMA_VERDICTS = "gadmec/verdicts/v1";
inline constexpr const char* SCHEMA_INGEST = "gadmec/ingest/v1";
inline constexpr const char* SCHEMA_ANALYSIS = "gadmec/analysis/v1";
inline constexpr const char* SCHEMA_AGREEMENT = "gadmec/agreement/v1";

struct JsonlFile {
    nlohmann::json header;
    std::vector<nlohmann::json> records;
};

inline void write_jsonl(const std::string& path, nlohmann::json header,
                        const std::vector<nlohmann::json>& records,
                        const std::string& schema) {
    header["schema"] = schema;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << header.dump() << "\n";
    for (const auto& r : records) out << r.dump() << "\n";
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline JsonlFile read_jsonl(const std::string& path, const std::string& expected_schema) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    JsonlFile file;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (lineno == 1) {
            const std::string schema = j.value("schema", std::string{});
            if (schema != expected_schema)
                throw Error(ErrorCode::ValidationError,
                            path + ": schema '" + schema + "', expected '" + expected_schema +
                                "'");
            file.header = std::move(j);
        } else {
            file.records.push_back(std::move(j));
        }
    }
    if (file.header.is_null())
        throw Error(ErrorCode::ValidationError, path + ": missing header record");
    return file;
}

inline void write_json(const std::string& path, const nlohmann::json& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << doc.dump(2) << "\n";
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

// ---- typed record conversions -----------------------------------------------

inline nlohmann::json plan_to_json(const fitness::EvidencePlan& plan,
                                   const std::string& selector) {
    nlohmann::json j;
    j["question_id"] = plan.question_id;
    j["selector"] = selector;
    j["chunk_ids"] = plan.chunk_ids;
    j["total_tokens"] = plan.total_tokens;
    j["theme_constraint_met"] = plan.theme_constraint_met;
    return j;
}

inline fitness::EvidencePlan plan_from_json(const nlohmann::json& j) {
    fitness::EvidencePlan plan;
    plan.question_id = j.at("question_id").get<std::string>();
    plan.chunk_ids = j.at("chunk_ids").get<std::vector<std::string>>();
    plan.total_tokens = j.at("total_tokens").get<long long>();
    plan.theme_constraint_met = j.value("theme_constraint_met", true);
    return plan;
}

inline nlohmann::json answer_to_json(const judging::AnswerRecord& a) {
    nlohmann::json j;
    j["question_id"] = a.question_id;
    j["method"] = a.method;
    j["answer_text"] = a.answer_text;
    j["char_length"] = a.char_length;
    j["model_tag"] = a.model_tag;
    j["completion_cap"] = a.completion_cap;
    return j;
}

inline judging::AnswerRecord answer_from_json(const nlohmann::json& j) {
    judging::AnswerRecord a;
    a.question_id = j.at("question_id").get<std::string>();
    a.method = j.at("method").get<std::string>();
    a.answer_text = j.at("answer_text").get<std::string>();
    a.model_tag = j.value("model_tag", std::string{});
    a.completion_cap = j.value("completion_cap", 0ll);
    if (j.contains("char_length")) {
        a.char_length = j.at("char_length").get<std::size_t>();
        a.validate();
    } else {
        a.finalize();
    }
    return a;
}

inline nlohmann::json verdict_to_json(const judging::VerdictRecord& v) {
    nlohmann::json j;
    j["pair_id"] = v.pair_id;
    j["question_id"] = v.question_id;
    j["combination_id"] = v.combination_id;
    j["method_a_slot"] = v.method_a_slot;
    j["method_b_slot"] = v.method_b_slot;
    j["winner"] = judging::winner_label(v.winner);
    j["winner_method"] = v.winner_method;
    j["judge_id"] = v.judge_id;
    j["raw_output"] = v.raw_output;
    j["flagged_skip"] = v.flagged_skip;
    j["skip_reason"] = v.skip_reason;
    return j;
}

inline judging::VerdictRecord verdict_from_json(const nlohmann::json& j) {
    judging::VerdictRecord v;
    v.pair_id = j.at("pair_id").get<std::string>();
    v.question_id = j.at("question_id").get<std::string>();
    v.combination_id = j.value("combination_id", std::string{});
    v.method_a_slot = j.at("method_a_slot").get<std::string>();
    v.method_b_slot = j.at("method_b_slot").get<std::string>();
    const std::string w = j.at("winner").get<std::string>();
    if (w == "A") {
        v.winner = judging::Winner::SlotA;
    } else if (w == "B") {
        v.winner = judging::Winner::SlotB;
    } else if (w == "TIE") {
        v.winner = judging::Winner::Tie;
    } else {
        throw Error(ErrorCode::ParseError, "unknown winner '" + w + "'");
    }
    v.winner_method = j.value("winner_method", std::string{});
    v.judge_id = j.value("judge_id", std::string{});
    v.raw_output = j.value("raw_output", std::string{});
    v.flagged_skip = j.value("flagged_skip", false);
    v.skip_reason = j.value("skip_reason", std::string{});
    if (judging::derive_winner_method(v) != v.winner_method && !v.flagged_skip)
        throw Error(ErrorCode::ValidationError,
                    "winner_method inconsistent with slots for pair " + v.pair_id);
    return v;
}

} // namespace gadmec::artifact
