#pragma once

#include <cctype>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "gadmec/error.hpp"

namespace gadmec {

/// Number of UTF-8 code points (continuation bytes are not counted).
inline std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char b : text) {
        if ((b & 0xC0) != 0x80) ++n;
    }
    return n;
}

/// Lowercased alphanumeric runs; every byte outside [A-Za-z0-9] splits.
/// Shared by the BM25 index and the Jaccard diagnostics so both sides of a
/// lexical comparison see the same tokens. ASCII-only classification keeps
/// the rule locale-independent.
inline std::vector<std::string> lexical_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char b = static_cast<unsigned char>(ch);
        if ((b >= 'a' && b <= 'z') || (b >= '0' && b <= '9')) {
            cur.push_back(static_cast<char>(b));
        } else if (b >= 'A' && b <= 'Z') {
            cur.push_back(static_cast<char>(b - 'A' + 'a'));
        } else {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

inline std::unordered_set<std::string> lexical_token_set(std::string_view text) {
    auto toks = lexical_tokens(text);
    return std::unordered_set<std::string>(toks.begin(), toks.end());
}

/// Token counters are named so that run logs can record which budget unit a
/// run used; budgets are only comparable within one counter.
class TokenCounter {
  public:
    TokenCounter() = default;
    TokenCounter(std::string name, std::function<long long(std::string_view)> fn)
        : name_(std::move(name)), fn_(std::move(fn)) {}

    const std::string& name() const { return name_; }
    long long count(std::string_view text) const { return fn_(text); }

    /// "whitespace": non-empty runs separated by ASCII whitespace.
    /// "chars4": ceil(code_points / 4), a tokenizer-free approximation.
    static TokenCounter by_name(const std::string& name) {
        if (name == "whitespace") {
            return TokenCounter("whitespace", [](std::string_view t) {
                long long n = 0;
                bool in_tok = false;
                for (unsigned char b : t) {
                    bool ws = b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\f' ||
                              b == '\v';
                    if (ws) {
                        in_tok = false;
                    } else if (!in_tok) {
                        in_tok = true;
                        ++n;
                    }
                }
                return n;
            });
        }
        if (name == "chars4") {
            return TokenCounter("chars4", [](std::string_view t) {
                return static_cast<long long>((utf8_length(t) + 3) / 4);
            });
        }
        throw Error(ErrorCode::ConfigurationError, "unknown token counter '" + name + "'");
    }

  private:
    std::string name_;
    std::function<long long(std::string_view)> fn_;
};

inline long long count_tokens(std::string_view text, const TokenCounter& counter) {
    return counter.count(text);
}

} // namespace gadmec
