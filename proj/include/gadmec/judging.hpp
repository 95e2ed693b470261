#pragma once

// Pairwise judging: blinded slot randomisation, pluggable backends, verdict
// parsing with bounded retries, and flagged skips instead of silent drops.
// Every stochastic choice is keyed to (run seed, pair_id), never to call
// order, so concurrent judging cannot change any verdict.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "gadmec/corpus.hpp"
#include "gadmec/error.hpp"
#include "gadmec/rng.hpp"
#include "gadmec/text.hpp"

namespace gadmec::judging {

struct AnswerRecord {
    std::string question_id;
    std::string method;
    std::string answer_text;
    std::size_t char_length = 0; // UTF-8 code points of answer_text
    std::string model_tag;
    long long completion_cap = 0;

    void finalize() { char_length = utf8_length(answer_text); }

    void validate() const {
        if (char_length != utf8_length(answer_text))
            throw Error(ErrorCode::ValidationError,
                        "char_length mismatch for question '" + question_id + "' method '" +
                            method + "'");
    }
};

enum class Winner { SlotA, SlotB, Tie };

inline const char* winner_label(Winner w) {
    switch (w) {
        case Winner::SlotA: return "A";
        case Winner::SlotB: return "B";
        default: return "TIE";
    }
}

struct VerdictRecord {
    std::string pair_id;
    std::string question_id;
    std::string combination_id;
    std::string method_a_slot; // method shown as answer A after randomisation
    std::string method_b_slot;
    Winner winner = Winner::Tie;
    std::string winner_method; // empty for ties and skips
    std::string judge_id;
    std::string raw_output;
    bool flagged_skip = false;
    std::string skip_reason;
};

/// Everything a backend may need. HTTP backends serialise only the blinded
/// wire fields (question text, the two answer texts, template id); the rest
/// is harness-side context for deterministic mocks and bookkeeping.
struct JudgeRequest {
    std::string question_text;
    std::string answer_a;
    std::string answer_b;
    std::string template_id;

    std::string pair_id;
    std::string question_id;
    std::string method_a;
    std::string method_b;
    std::string reference_text;
};

class JudgeBackend {
  public:
    virtual ~JudgeBackend() = default;
    virtual std::string id() const = 0;
    /// Returns the raw judge output; throws Error(TransportError) when the
    /// backend cannot be reached.
    virtual std::string raw_verdict(const JudgeRequest& request) = 0;
};

/// The verdict token is the final non-empty line: A, B, or TIE (ASCII case
/// folded, surrounding whitespace ignored). Anything else is unparseable.
inline bool parse_verdict(const std::string& raw, Winner& out) {
    std::size_t end = raw.size();
    while (end > 0) {
        std::size_t start = raw.find_last_of('\n', end - 1);
        std::size_t line_begin = start == std::string::npos ? 0 : start + 1;
        std::string line = raw.substr(line_begin, end - line_begin);
        std::string token;
        for (char ch : line) {
            if (ch == ' ' || ch == '\t' || ch == '\r') continue;
            token.push_back(ch >= 'a' && ch <= 'z' ? static_cast<char>(ch - 'a' + 'A') : ch);
        }
        if (!token.empty()) {
            if (token == "A") {
                out = Winner::SlotA;
                return true;
            }
            if (token == "B") {
                out = Winner::SlotB;
                return true;
            }
            if (token == "TIE") {
                out = Winner::Tie;
                return true;
            }
            return false;
        }
        if (start == std::string::npos) break;
        end = start;
    }
    return false;
}

inline std::string make_pair_id(const std::string& method_x, const std::string& method_y,
                                const std::string& question_id) {
    return method_x + "|" + method_y + "|" + question_id;
}

/// Fair coin keyed to (run seed, pair_id): true puts method_x into slot A.
inline bool randomize_positions(const std::string& method_x, const std::string& method_y,
                                const std::string& pair_id, std::uint64_t run_seed) {
    if (method_x == method_y)
        throw Error(ErrorCode::SameMethod, "cannot judge '" + method_x + "' against itself");
    return Rng::substream(run_seed, "judging.slots|" + pair_id).coin();
}

struct RetryPolicy {
    int transport_retries = 3;
    int parse_retries = 1;
    int backoff_ms = 250; // doubled per transport attempt; 0 disables sleeping
};

/// One blinded comparison. Transport errors are retried with exponential
/// backoff and propagate when exhausted; unparseable output is retried once
/// and then recorded as a flagged skip, never dropped.
inline VerdictRecord judge_pair(JudgeBackend& backend, const corpus::Question& question,
                                const AnswerRecord& answer_x, const AnswerRecord& answer_y,
                                const std::string& template_id, std::uint64_t run_seed,
                                const RetryPolicy& retry = {},
                                const std::string& reference_text = {}) {
    if (answer_x.question_id != answer_y.question_id ||
        answer_x.question_id != question.question_id)
        throw Error(ErrorCode::ValidationError, "answers and question are not aligned");

    VerdictRecord v;
    v.pair_id = make_pair_id(answer_x.method, answer_y.method, question.question_id);
    v.question_id = question.question_id;
    v.combination_id = question.combination_id;
    v.judge_id = backend.id();

    const bool x_in_a = randomize_positions(answer_x.method, answer_y.method, v.pair_id, run_seed);
    const AnswerRecord& slot_a = x_in_a ? answer_x : answer_y;
    const AnswerRecord& slot_b = x_in_a ? answer_y : answer_x;
    v.method_a_slot = slot_a.method;
    v.method_b_slot = slot_b.method;

    JudgeRequest req;
    req.question_text = question.text;
    req.answer_a = slot_a.answer_text;
    req.answer_b = slot_b.answer_text;
    req.template_id = template_id;
    req.pair_id = v.pair_id;
    req.question_id = question.question_id;
    req.method_a = slot_a.method;
    req.method_b = slot_b.method;
    req.reference_text = reference_text;

    auto call = [&]() {
        int attempt = 0;
        for (;;) {
            try {
                return backend.raw_verdict(req);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::TransportError || attempt >= retry.transport_retries)
                    throw;
                if (retry.backoff_ms > 0)
                    std::this_thread::sleep_for(
                        std::chrono::milliseconds(retry.backoff_ms << attempt));
                ++attempt;
            }
        }
    };

    Winner w = Winner::Tie;
    bool parsed = false;
    for (int parse_attempt = 0; parse_attempt <= retry.parse_retries; ++parse_attempt) {
        v.raw_output = call();
        if (parse_verdict(v.raw_output, w)) {
            parsed = true;
            break;
        }
    }
    if (!parsed) {
        v.flagged_skip = true;
        v.skip_reason = "unparseable verdict after retry";
        return v;
    }
    v.winner = w;
    if (w == Winner::SlotA) v.winner_method = v.method_a_slot;
    if (w == Winner::SlotB) v.winner_method = v.method_b_slot;
    return v;
}

/// Winner reconstruction from slots; used to assert the blinding round-trip.
inline std::string derive_winner_method(const VerdictRecord& v) {
    switch (v.winner) {
        case Winner::SlotA: return v.method_a_slot;
        case Winner::SlotB: return v.method_b_slot;
        default: return {};
    }
}

// ---- mock backends ---------------------------------------------------------

enum class MockPolicy { LongerWins, HigherJaccardWithReference, SeededRandom };

/// Deterministic stand-in for a remote judge. seeded_random draws a tie with
/// probability p_tie, otherwise makes the configured focal method win with
/// probability win_rate; with no focal method configured (or the focal
/// method absent from the pair) slot A takes that role. Draws are keyed to
/// the pair_id, so verdicts are independent of judging order.
class MockJudge : public JudgeBackend {
  public:
    struct Params {
        MockPolicy policy = MockPolicy::LongerWins;
        double p_tie = 0.0;
        double win_rate = 0.5;
        std::string focal_method;
        std::uint64_t seed = 0;
        std::string judge_id = "mock";
    };

    explicit MockJudge(Params params) : params_(std::move(params)) {
        if (params_.p_tie < 0.0 || params_.p_tie > 1.0)
            throw Error(ErrorCode::ConfigurationError, "p_tie must lie in [0,1]");
        if (params_.win_rate < 0.0 || params_.win_rate > 1.0)
            throw Error(ErrorCode::ConfigurationError, "win_rate must lie in [0,1]");
    }

    std::string id() const override { return params_.judge_id; }

    std::string raw_verdict(const JudgeRequest& req) override {
        switch (params_.policy) {
            case MockPolicy::LongerWins: {
                const std::size_t la = utf8_length(req.answer_a);
                const std::size_t lb = utf8_length(req.answer_b);
                if (la == lb) return wrap("equal lengths", "TIE");
                return la > lb ? wrap("answer A is longer", "A")
                              : wrap("answer B is longer", "B");
            }
            case MockPolicy::HigherJaccardWithReference: {
                const double ja = jaccard(req.answer_a, req.reference_text);
                const double jb = jaccard(req.answer_b, req.reference_text);
                if (ja == jb) return wrap("equal reference overlap", "TIE");
                return ja > jb ? wrap("answer A overlaps the reference more", "A")
                              : wrap("answer B overlaps the reference more", "B");
            }
            default: {
                Rng rng = Rng::substream(params_.seed, "judge.mock|" + req.pair_id);
                if (rng.uniform() < params_.p_tie) return wrap("coin landed on tie", "TIE");
                const bool focal_in_a = params_.focal_method.empty()
                                            ? true
                                            : req.method_a == params_.focal_method;
                const bool focal_present = params_.focal_method.empty() ||
                                           req.method_a == params_.focal_method ||
                                           req.method_b == params_.focal_method;
                const bool focal_wins = rng.uniform() < params_.win_rate;
                const bool a_wins = focal_present && !focal_in_a ? !focal_wins : focal_wins;
                return a_wins ? wrap("preferred the first answer", "A")
                              : wrap("preferred the second answer", "B");
            }
        }
    }

  private:
    static std::string wrap(const std::string& note, const std::string& token) {
        return "mock judge: " + note + "\n" + token;
    }
    static double jaccard(const std::string& a, const std::string& b) {
        auto sa = lexical_token_set(a);
        auto sb = lexical_token_set(b);
        if (sa.empty() && sb.empty()) return 1.0;
        std::size_t inter = 0;
        for (const auto& t : sa) inter += sb.count(t);
        const std::size_t uni = sa.size() + sb.size() - inter;
        return static_cast<double>(inter) / static_cast<double>(uni);
    }
    Params params_;
};

inline std::unique_ptr<JudgeBackend> mock_judge(MockJudge::Params params) {
    return std::make_unique<MockJudge>(std::move(params));
}

// ---- batch comparison ------------------------------------------------------

struct ComparisonResult {
    std::vector<VerdictRecord> verdicts; // sorted by pair_id
    std::vector<std::string> missing_x;  // question_ids lacking a method_x answer
    std::vector<std::string> missing_y;
};

/// Judge every question that has answers from both methods; missing answers
/// are reported and the run continues on the intersection. Pairs are judged
/// concurrently up to `concurrency` threads; output order and content are
/// independent of scheduling.
inline ComparisonResult run_comparison(
    const std::string& method_x, const std::string& method_y,
    const std::vector<corpus::Question>& questions,
    const std::vector<AnswerRecord>& answers, JudgeBackend& backend,
    std::uint64_t run_seed, const std::string& template_id, unsigned concurrency = 1,
    const RetryPolicy& retry = {},
    const std::function<std::string(const corpus::Question&)>& reference_lookup = {}) {
    if (method_x == method_y)
        throw Error(ErrorCode::SameMethod, "comparison arms must differ");

    std::unordered_map<std::string, const AnswerRecord*> by_x, by_y;
    for (const auto& a : answers) {
        if (a.method == method_x) by_x[a.question_id] = &a;
        if (a.method == method_y) by_y[a.question_id] = &a;
    }

    ComparisonResult result;
    std::vector<const corpus::Question*> shared;
    for (const auto& q : questions) {
        const bool hx = by_x.count(q.question_id) > 0;
        const bool hy = by_y.count(q.question_id) > 0;
        if (hx && hy) {
            shared.push_back(&q);
        } else {
            if (!hx) result.missing_x.push_back(q.question_id);
            if (!hy) result.missing_y.push_back(q.question_id);
        }
    }

    result.verdicts.resize(shared.size());
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= shared.size()) return;
            try {
                const corpus::Question& q = *shared[i];
                std::string ref = reference_lookup ? reference_lookup(q) : std::string{};
                result.verdicts[i] =
                    judge_pair(backend, q, *by_x.at(q.question_id), *by_y.at(q.question_id),
                               template_id, run_seed, retry, ref);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                cursor.store(shared.size());
                return;
            }
        }
    };

    if (concurrency <= 1 || shared.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const unsigned n_threads = std::min<unsigned>(concurrency,
                                                      static_cast<unsigned>(shared.size()));
        threads.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(result.verdicts.begin(), result.verdicts.end(),
              [](const VerdictRecord& a, const VerdictRecord& b) { return a.pair_id < b.pair_id; });
    std::sort(result.missing_x.begin(), result.missing_x.end());
    std::sort(result.missing_y.begin(), result.missing_y.end());
    return result;
}

} // namespace gadmec::judging
