#pragma once

// Run configuration: a TOML-subset document (flat sections, scalar and
// scalar-array values, # comments) parsed strictly, re-serialised
// canonically (sorted sections and keys, shortest float form), and hashed
// with SHA-256. The hash is embedded in every artifact header so any output
// can be traced to the exact configuration that produced it.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gadmec/brkga.hpp"
#include "gadmec/error.hpp"
#include "gadmec/fitness.hpp"
#include "gadmec/sha256.hpp"

namespace gadmec::run {

struct TomlValue {
    enum class Kind { String, Integer, Float, Boolean, Array };
    Kind kind = Kind::String;
    std::string str;
    long long integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;

    double as_number() const {
        if (kind == Kind::Integer) return static_cast<double>(integer);
        if (kind == Kind::Float) return real;
        throw Error(ErrorCode::ConfigurationError, "expected a number");
    }
};

using TomlSection = std::map<std::string, TomlValue>;
using TomlTable = std::map<std::string, TomlSection>;

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Cut an unquoted # comment; quotes are respected.
inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

inline TomlValue parse_scalar(const std::string& raw, const std::string& where) {
    TomlValue v;
    if (raw.empty())
        throw Error(ErrorCode::ConfigurationError, where + ": empty value");
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"')
            throw Error(ErrorCode::ConfigurationError, where + ": unterminated string");
        v.kind = TomlValue::Kind::String;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\') {
                if (i + 2 >= raw.size() + 1)
                    throw Error(ErrorCode::ConfigurationError, where + ": dangling escape");
                char e = raw[++i];
                switch (e) {
                    case 'n': v.str.push_back('\n'); break;
                    case 't': v.str.push_back('\t'); break;
                    case 'r': v.str.push_back('\r'); break;
                    case '"': v.str.push_back('"'); break;
                    case '\\': v.str.push_back('\\'); break;
                    default:
                        throw Error(ErrorCode::ConfigurationError,
                                    where + ": unsupported escape '\\" + std::string(1, e) + "'");
                }
            } else if (c == '"') {
                throw Error(ErrorCode::ConfigurationError, where + ": stray quote");
            } else {
                v.str.push_back(c);
            }
        }
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = TomlValue::Kind::Boolean;
        v.boolean = raw == "true";
        return v;
    }
    bool integral = true;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (i == 0 && (c == '+' || c == '-')) continue;
        if (c < '0' || c > '9') {
            integral = false;
            break;
        }
    }
    if (integral) {
        v.kind = TomlValue::Kind::Integer;
        auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v.integer);
        if (ec != std::errc{} || ptr != raw.data() + raw.size())
            throw Error(ErrorCode::ConfigurationError, where + ": bad integer '" + raw + "'");
        return v;
    }
    v.kind = TomlValue::Kind::Float;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v.real);
    if (ec != std::errc{} || ptr != raw.data() + raw.size())
        throw Error(ErrorCode::ConfigurationError, where + ": bad value '" + raw + "'");
    return v;
}

inline std::vector<std::string> split_array_items(const std::string& inner,
                                                  const std::string& where) {
    std::vector<std::string> items;
    std::string cur;
    bool in_string = false;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (in_string) {
            cur.push_back(c);
            if (c == '\\' && i + 1 < inner.size()) {
                cur.push_back(inner[++i]);
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
            cur.push_back(c);
        } else if (c == ',') {
            items.push_back(strip(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (in_string) throw Error(ErrorCode::ConfigurationError, where + ": unterminated string");
    std::string last = strip(cur);
    if (!last.empty()) items.push_back(last);
    for (const auto& it : items)
        if (it.empty()) throw Error(ErrorCode::ConfigurationError, where + ": empty array item");
    return items;
}

inline TomlValue parse_value(const std::string& raw, const std::string& where) {
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']')
            throw Error(ErrorCode::ConfigurationError, where + ": unterminated array");
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        for (const auto& item : split_array_items(raw.substr(1, raw.size() - 2), where))
            v.array.push_back(parse_scalar(item, where));
        return v;
    }
    return parse_scalar(raw, where);
}

inline void serialize_scalar(std::string& out, const TomlValue& v) {
    switch (v.kind) {
        case TomlValue::Kind::String: {
            out.push_back('"');
            for (char c : v.str) {
                switch (c) {
                    case '"': out += "\\\""; break;
                    case '\\': out += "\\\\"; break;
                    case '\n': out += "\\n"; break;
                    case '\t': out += "\\t"; break;
                    case '\r': out += "\\r"; break;
                    default: out.push_back(c);
                }
            }
            out.push_back('"');
            break;
        }
        case TomlValue::Kind::Integer: out += std::to_string(v.integer); break;
        case TomlValue::Kind::Float: {
            char buf[64];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v.real);
            out.append(buf, ptr);
            break;
        }
        case TomlValue::Kind::Boolean: out += v.boolean ? "true" : "false"; break;
        case TomlValue::Kind::Array: {
            out.push_back('[');
            for (std::size_t i = 0; i < v.array.size(); ++i) {
                if (i) out += ", ";
                serialize_scalar(out, v.array[i]);
            }
            out.push_back(']');
            break;
        }
    }
}

} // namespace detail

inline TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::string current;
    std::size_t lineno = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line = nl == std::string::npos ? text.substr(start)
                                                   : text.substr(start, nl - start);
        start = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string where = "config line " + std::to_string(lineno);
        line = detail::strip(detail::strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw Error(ErrorCode::ConfigurationError, where + ": unterminated section");
            current = detail::strip(line.substr(1, line.size() - 2));
            if (!detail::valid_key(current))
                throw Error(ErrorCode::ConfigurationError,
                            where + ": bad section name '" + current + "'");
            table[current]; // an empty section is legal
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigurationError, where + ": expected key = value");
        const std::string key = detail::strip(line.substr(0, eq));
        const std::string raw = detail::strip(line.substr(eq + 1));
        if (!detail::valid_key(key))
            throw Error(ErrorCode::ConfigurationError, where + ": bad key '" + key + "'");
        if (current.empty())
            throw Error(ErrorCode::ConfigurationError, where + ": key outside any section");
        auto& section = table[current];
        if (section.count(key))
            throw Error(ErrorCode::ConfigurationError,
                        where + ": duplicate key '" + key + "' in [" + current + "]");
        section.emplace(key, detail::parse_value(raw, where));
    }
    return table;
}

/// Sections and keys sorted, values in normal form; two documents that parse
/// to the same table serialise identically.
inline std::string canonical_toml(const TomlTable& table) {
    std::string out;
    for (const auto& [section, kv] : table) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : kv) {
            out += key + " = ";
            detail::serialize_scalar(out, value);
            out.push_back('\n');
        }
        out.push_back('\n');
    }
    return out;
}

// ---- the run configuration ---------------------------------------------------

struct RunConfig {
    std::string chunks_path;
    std::string embeddings_path;
    std::string manifest_path;
    std::string token_counter = "whitespace";

    std::string questions_path;
    std::string question_embeddings_path;

    std::vector<std::string> presets{"gadmec", "greedy", "mmr", "bm25"};
    std::size_t pool_k = 100;
    long long budget_tokens = 2000;
    double mmr_lambda = 0.5;
    std::map<std::string, long long> arm_budgets;

    fitness::FitnessWeights weights;
    brkga::BrkgaConfig brkga;

    std::string judge_backend = "mock";
    std::string judge_template_path = "assets/judge_prompt_v1.txt";
    std::string judge_id;
    std::string mock_policy = "seeded_random";
    double mock_p_tie = 0.0;
    double mock_win_rate = 0.5;
    std::string mock_focal;
    std::uint64_t judge_seed = 42;
    std::string judge_endpoint;
    std::string judge_auth_env;
    long long judge_rate_per_minute = 0;
    long long judge_timeout_seconds = 60;
    long long judge_concurrency = 1;

    std::map<std::string, std::string> answer_paths; // method -> answers file

    std::uint64_t bootstrap_replicates = 10000;
    std::uint64_t wild_replicates = 9999;
    std::size_t permutation_max_exact = 20;
    std::uint64_t permutation_sampled = 9999;
    std::uint64_t analysis_seed = 42;
    double family_alpha = 0.05;
    std::string analysis_status = "registered";

    std::string output_dir = "out";

    std::string canonical;
    std::string config_hash;
    std::string base_dir;

    std::string resolve(const std::string& path) const {
        if (path.empty() || path.front() == '/' || base_dir.empty()) return path;
        return base_dir + "/" + path;
    }

    /// The fixed-budget rule: every arm must run under the single configured
    /// budget; any per-arm override that disagrees is a violation, as is a
    /// non-positive budget.
    void check_fixed_budget() const {
        if (budget_tokens <= 0)
            throw Error(ErrorCode::FixedBudgetViolation, "budget_tokens must be positive");
        for (const auto& [arm, b] : arm_budgets) {
            if (b != budget_tokens)
                throw Error(ErrorCode::FixedBudgetViolation,
                            "arm '" + arm + "' declares budget " + std::to_string(b) +
                                " but the run budget is " + std::to_string(budget_tokens));
        }
    }
};

namespace detail {

class SectionReader {
  public:
    SectionReader(const TomlTable& table, const std::string& name) : name_(name) {
        auto it = table.find(name);
        if (it != table.end()) section_ = &it->second;
    }

    bool present() const { return section_ != nullptr; }

    const TomlValue* find(const std::string& key) {
        if (!section_) return nullptr;
        used_.push_back(key);
        auto it = section_->find(key);
        return it == section_->end() ? nullptr : &it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::String)
            throw Error(ErrorCode::ConfigurationError, loc(key) + " must be a string");
        return v->str;
    }

    long long get_int(const std::string& key, long long fallback) {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Integer)
            throw Error(ErrorCode::ConfigurationError, loc(key) + " must be an integer");
        return v->integer;
    }

    double get_number(const std::string& key, double fallback) {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        return v->as_number();
    }

    bool get_bool(const std::string& key, bool fallback) {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Boolean)
            throw Error(ErrorCode::ConfigurationError, loc(key) + " must be a boolean");
        return v->boolean;
    }

    std::vector<std::string> get_string_array(const std::string& key,
                                              std::vector<std::string> fallback) {
        const TomlValue* v = find(key);
        if (!v) return fallback;
        if (v->kind != TomlValue::Kind::Array)
            throw Error(ErrorCode::ConfigurationError, loc(key) + " must be an array");
        std::vector<std::string> out;
        for (const auto& item : v->array) {
            if (item.kind != TomlValue::Kind::String)
                throw Error(ErrorCode::ConfigurationError, loc(key) + " must hold strings");
            out.push_back(item.str);
        }
        return out;
    }

    /// Every key must have been consumed; typos are configuration errors.
    void finish() const {
        if (!section_) return;
        for (const auto& [key, _] : *section_) {
            if (std::find(used_.begin(), used_.end(), key) == used_.end())
                throw Error(ErrorCode::ConfigurationError,
                            "unknown key '" + key + "' in [" + name_ + "]");
        }
    }

  private:
    std::string loc(const std::string& key) const { return "[" + name_ + "]." + key; }
    std::string name_;
    const TomlSection* section_ = nullptr;
    std::vector<std::string> used_;
};

} // namespace detail

inline RunConfig config_from_table(const TomlTable& table, const std::string& base_dir) {
    static const std::vector<std::string> known_sections = {
        "corpus", "questions", "selection", "fitness",  "brkga",
        "budgets", "judge",    "answers",   "analysis", "output"};
    for (const auto& [name, _] : table) {
        if (std::find(known_sections.begin(), known_sections.end(), name) ==
            known_sections.end())
            throw Error(ErrorCode::ConfigurationError, "unknown section [" + name + "]");
    }

    RunConfig c;
    c.base_dir = base_dir;
    c.canonical = canonical_toml(table);
    c.config_hash = sha256_hex(c.canonical);

    {
        detail::SectionReader s(table, "corpus");
        c.chunks_path = s.get_string("chunks", "");
        c.embeddings_path = s.get_string("embeddings", "");
        c.manifest_path = s.get_string("manifest", "");
        c.token_counter = s.get_string("token_counter", c.token_counter);
        s.finish();
    }
    {
        detail::SectionReader s(table, "questions");
        c.questions_path = s.get_string("path", "");
        c.question_embeddings_path = s.get_string("embeddings", "");
        s.finish();
    }
    {
        detail::SectionReader s(table, "selection");
        c.presets = s.get_string_array("presets", c.presets);
        c.pool_k = static_cast<std::size_t>(s.get_int("pool_k", static_cast<long long>(c.pool_k)));
        c.budget_tokens = s.get_int("budget_tokens", c.budget_tokens);
        c.mmr_lambda = s.get_number("mmr_lambda", c.mmr_lambda);
        s.finish();
    }
    {
        detail::SectionReader s(table, "fitness");
        c.weights.alpha = s.get_number("alpha", c.weights.alpha);
        c.weights.beta = s.get_number("beta", c.weights.beta);
        c.weights.gamma = s.get_number("gamma", c.weights.gamma);
        c.weights.delta = s.get_number("delta", c.weights.delta);
        c.weights.epsilon = s.get_number("epsilon", c.weights.epsilon);
        c.weights.zeta = s.get_number("zeta", c.weights.zeta);
        c.weights.subaspect_threshold =
            s.get_number("subaspect_threshold", c.weights.subaspect_threshold);
        s.finish();
    }
    {
        detail::SectionReader s(table, "brkga");
        c.brkga.population_size = static_cast<std::size_t>(
            s.get_int("population_size", static_cast<long long>(c.brkga.population_size)));
        c.brkga.elite_fraction = s.get_number("elite_fraction", c.brkga.elite_fraction);
        c.brkga.elite_inherit_prob =
            s.get_number("elite_inherit_prob", c.brkga.elite_inherit_prob);
        c.brkga.max_generations = static_cast<std::size_t>(
            s.get_int("max_generations", static_cast<long long>(c.brkga.max_generations)));
        c.brkga.stagnation_limit = static_cast<std::size_t>(
            s.get_int("stagnation_limit", static_cast<long long>(c.brkga.stagnation_limit)));
        c.brkga.seed = static_cast<std::uint64_t>(
            s.get_int("seed", static_cast<long long>(c.brkga.seed)));
        c.brkga.min_query_similarity =
            s.get_number("min_query_similarity", c.brkga.min_query_similarity);
        c.brkga.redundancy_threshold =
            s.get_number("redundancy_threshold", c.brkga.redundancy_threshold);
        c.brkga.min_theme_clusters = static_cast<std::size_t>(s.get_int(
            "min_theme_clusters", static_cast<long long>(c.brkga.min_theme_clusters)));
        c.brkga.kmeans_k = static_cast<std::size_t>(
            s.get_int("kmeans_k", static_cast<long long>(c.brkga.kmeans_k)));
        c.brkga.constraints_enabled =
            s.get_bool("constraints_enabled", c.brkga.constraints_enabled);
        s.finish();
    }
    c.brkga.budget_tokens = c.budget_tokens;
    {
        auto it = table.find("budgets");
        if (it != table.end()) {
            for (const auto& [arm, value] : it->second) {
                if (value.kind != TomlValue::Kind::Integer)
                    throw Error(ErrorCode::ConfigurationError,
                                "[budgets]." + arm + " must be an integer");
                c.arm_budgets[arm] = value.integer;
            }
        }
    }
    {
        detail::SectionReader s(table, "judge");
        c.judge_backend = s.get_string("backend", c.judge_backend);
        c.judge_template_path = s.get_string("template", c.judge_template_path);
        c.judge_id = s.get_string("judge_id", "");
        c.mock_policy = s.get_string("mock_policy", c.mock_policy);
        c.mock_p_tie = s.get_number("mock_p_tie", c.mock_p_tie);
        c.mock_win_rate = s.get_number("mock_win_rate", c.mock_win_rate);
        c.mock_focal = s.get_string("mock_focal", c.mock_focal);
        c.judge_seed = static_cast<std::uint64_t>(
            s.get_int("seed", static_cast<long long>(c.judge_seed)));
        c.judge_endpoint = s.get_string("endpoint", "");
        c.judge_auth_env = s.get_string("auth_env", "");
        c.judge_rate_per_minute = s.get_int("rate_per_minute", 0);
        c.judge_timeout_seconds = s.get_int("timeout_seconds", 60);
        c.judge_concurrency = s.get_int("concurrency", 1);
        s.finish();
    }
    {
        auto it = table.find("answers");
        if (it != table.end()) {
            for (const auto& [method, value] : it->second) {
                if (value.kind != TomlValue::Kind::String)
                    throw Error(ErrorCode::ConfigurationError,
                                "[answers]." + method + " must be a path string");
                c.answer_paths[method] = value.str;
            }
        }
    }
    {
        detail::SectionReader s(table, "analysis");
        c.bootstrap_replicates = static_cast<std::uint64_t>(s.get_int(
            "bootstrap_replicates", static_cast<long long>(c.bootstrap_replicates)));
        c.wild_replicates = static_cast<std::uint64_t>(
            s.get_int("wild_replicates", static_cast<long long>(c.wild_replicates)));
        c.permutation_max_exact = static_cast<std::size_t>(s.get_int(
            "permutation_max_exact", static_cast<long long>(c.permutation_max_exact)));
        c.permutation_sampled = static_cast<std::uint64_t>(s.get_int(
            "permutation_sampled", static_cast<long long>(c.permutation_sampled)));
        c.analysis_seed = static_cast<std::uint64_t>(
            s.get_int("seed", static_cast<long long>(c.analysis_seed)));
        c.family_alpha = s.get_number("family_alpha", c.family_alpha);
        c.analysis_status = s.get_string("status", c.analysis_status);
        s.finish();
    }
    {
        detail::SectionReader s(table, "output");
        c.output_dir = s.get_string("dir", c.output_dir);
        s.finish();
    }

    if (c.judge_concurrency < 1)
        throw Error(ErrorCode::ConfigurationError, "[judge].concurrency must be >= 1");
    if (c.analysis_status != "registered" && c.analysis_status != "addendum" &&
        c.analysis_status != "exploratory")
        throw Error(ErrorCode::ConfigurationError,
                    "[analysis].status must be registered, addendum, or exploratory");
    return c;
}

inline RunConfig config_from_text(const std::string& text, const std::string& base_dir = "") {
    return config_from_table(parse_toml(text), base_dir);
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto slash = path.find_last_of('/');
    return config_from_text(text, slash == std::string::npos ? "" : path.substr(0, slash));
}

} // namespace gadmec::run
