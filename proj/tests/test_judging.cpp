#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "gadmec/judge_http.hpp"
#include "gadmec/judging.hpp"

using namespace gadmec;
using namespace gadmec::judging;

namespace {

corpus::Question make_question(const std::string& id, const std::string& combo = "combo_1") {
    corpus::Question q;
    q.question_id = id;
    q.text = "what changed?";
    q.combination_id = combo;
    q.query_embedding = {1.0f, 0.0f};
    return q;
}

AnswerRecord make_answer(const std::string& qid, const std::string& method,
                         const std::string& text) {
    AnswerRecord a;
    a.question_id = qid;
    a.method = method;
    a.answer_text = text;
    a.finalize();
    return a;
}

// Scripted backend: returns canned outputs in order, counting calls.
class ScriptedJudge : public JudgeBackend {
  public:
    explicit ScriptedJudge(std::vector<std::string> outputs)
        : outputs_(std::move(outputs)) {}
    std::string id() const override { return "scripted"; }
    std::string raw_verdict(const JudgeRequest&) override {
        const std::size_t i = calls_.fetch_add(1);
        if (i < outputs_.size()) return outputs_[i];
        return outputs_.empty() ? std::string{} : outputs_.back();
    }
    int calls() const { return static_cast<int>(calls_.load()); }

  private:
    std::vector<std::string> outputs_;
    std::atomic<std::size_t> calls_{0};
};

class FlakyJudge : public JudgeBackend {
  public:
    FlakyJudge(int failures_before_success, std::string then)
        : remaining_(failures_before_success), then_(std::move(then)) {}
    std::string id() const override { return "flaky"; }
    std::string raw_verdict(const JudgeRequest&) override {
        calls_.fetch_add(1);
        if (remaining_.fetch_sub(1) > 0)
            throw Error(ErrorCode::TransportError, "synthetic outage");
        return then_;
    }
    int calls() const { return calls_.load(); }

  private:
    std::atomic<int> remaining_;
    std::string then_;
    std::atomic<int> calls_{0};
};

} // namespace

TEST_CASE("verdict parsing reads the final non-empty line") {
    Winner w = Winner::Tie;
    CHECK(parse_verdict("A", w));
    CHECK(w == Winner::SlotA);
    CHECK(parse_verdict("b", w));
    CHECK(w == Winner::SlotB);
    CHECK(parse_verdict("tie", w));
    CHECK(w == Winner::Tie);
    CHECK(parse_verdict("  TIE \r", w));
    CHECK(parse_verdict("long chain of reasoning\nmore text\nA", w));
    CHECK(w == Winner::SlotA);
    CHECK(parse_verdict("reasoning mentions A and B\nTIE\n\n\n", w));
    CHECK(w == Winner::Tie);
    CHECK(parse_verdict("T I E", w)); // inner whitespace is stripped
    CHECK(w == Winner::Tie);

    CHECK_FALSE(parse_verdict("", w));
    CHECK_FALSE(parse_verdict("\n\n", w));
    CHECK_FALSE(parse_verdict("The answer is A", w));
    CHECK_FALSE(parse_verdict("C", w));
    CHECK_FALSE(parse_verdict("reasoning\nAB", w));
}

TEST_CASE("pair ids and slot randomisation") {
    CHECK(make_pair_id("mx", "my", "q7") == "mx|my|q7");
    CHECK_THROWS_AS(randomize_positions("m", "m", "m|m|q", 42), Error);

    const bool first = randomize_positions("mx", "my", "mx|my|q1", 42);
    CHECK(randomize_positions("mx", "my", "mx|my|q1", 42) == first);

    int x_in_a = 0;
    const int trials = 2000;
    for (int i = 0; i < trials; ++i) {
        if (randomize_positions("mx", "my", "mx|my|q" + std::to_string(i), 42)) ++x_in_a;
    }
    const double frac = static_cast<double>(x_in_a) / trials;
    CHECK(frac > 0.46);
    CHECK(frac < 0.54);
}

TEST_CASE("answer records check their recorded lengths") {
    auto a = make_answer("q1", "mx", "héllo wörld");
    CHECK(a.char_length == 11);
    CHECK_NOTHROW(a.validate());
    a.char_length = 3;
    CHECK_THROWS_AS(a.validate(), Error);
}

TEST_CASE("judge_pair unblinds the slot verdict back to a method") {
    auto q = make_question("q1");
    auto longer = make_answer("q1", "mx", std::string(300, 'x'));
    auto shorter = make_answer("q1", "my", std::string(50, 'y'));

    MockJudge judge({MockPolicy::LongerWins, 0.0, 0.5, "", 0, "mock"});
    auto v = judge_pair(judge, q, longer, shorter, "tpl", 42);
    CHECK(v.pair_id == "mx|my|q1");
    CHECK(v.combination_id == "combo_1");
    CHECK(v.judge_id == "mock");
    CHECK_FALSE(v.flagged_skip);
    CHECK(v.winner_method == "mx"); // longer answer wins regardless of slot
    CHECK(derive_winner_method(v) == v.winner_method);
    // The slots really are the two methods in some order.
    const bool x_in_a = v.method_a_slot == "mx";
    CHECK((x_in_a ? v.method_b_slot : v.method_a_slot) == "my");
    CHECK(x_in_a == randomize_positions("mx", "my", v.pair_id, 42));

    auto mismatched = make_answer("q2", "my", "text");
    CHECK_THROWS_AS(judge_pair(judge, q, longer, mismatched, "tpl", 42), Error);
}

TEST_CASE("unparseable output is retried once, then flagged as a skip") {
    auto q = make_question("q1");
    auto ax = make_answer("q1", "mx", "alpha");
    auto ay = make_answer("q1", "my", "beta");

    ScriptedJudge hopeless({"no verdict here", "still nothing"});
    auto v = judge_pair(hopeless, q, ax, ay, "tpl", 42);
    CHECK(v.flagged_skip);
    CHECK(v.skip_reason == "unparseable verdict after retry");
    CHECK(v.winner_method.empty());
    CHECK(hopeless.calls() == 2); // initial attempt + one parse retry

    ScriptedJudge recovers({"garbled", "after thought\nB"});
    auto ok = judge_pair(recovers, q, ax, ay, "tpl", 42);
    CHECK_FALSE(ok.flagged_skip);
    CHECK(ok.winner == Winner::SlotB);
    CHECK(recovers.calls() == 2);
}

TEST_CASE("transport failures back off and then propagate") {
    auto q = make_question("q1");
    auto ax = make_answer("q1", "mx", "alpha");
    auto ay = make_answer("q1", "my", "beta");

    RetryPolicy quick;
    quick.backoff_ms = 0;

    FlakyJudge recovers(2, "looks fine\nA");
    auto v = judge_pair(recovers, q, ax, ay, "tpl", 42, quick);
    CHECK_FALSE(v.flagged_skip);
    CHECK(recovers.calls() == 3);

    FlakyJudge dead(100, "unreached");
    try {
        judge_pair(dead, q, ax, ay, "tpl", 42, quick);
        FAIL("expected transport error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TransportError);
    }
    CHECK(dead.calls() == 4); // initial + transport_retries
}

TEST_CASE("mock policies are deterministic and honour their knobs") {
    auto q = make_question("q1");

    SECTION("equal lengths tie") {
        MockJudge judge({MockPolicy::LongerWins, 0.0, 0.5, "", 0, "mock"});
        auto ax = make_answer("q1", "mx", "aaaa");
        auto ay = make_answer("q1", "my", "bbbb");
        auto v = judge_pair(judge, q, ax, ay, "tpl", 42);
        CHECK(v.winner == Winner::Tie);
        CHECK(v.winner_method.empty());
    }

    SECTION("reference overlap picks the on-topic answer") {
        MockJudge judge({MockPolicy::HigherJaccardWithReference, 0.0, 0.5, "", 0, "mock"});
        auto ax = make_answer("q1", "mx", "solvent phase transition energy");
        auto ay = make_answer("q1", "my", "completely unrelated words here");
        auto v = judge_pair(judge, q, ax, ay, "tpl", 42, {},
                            "the solvent phase transition");
        CHECK(v.winner_method == "mx");
    }

    SECTION("p_tie one always ties") {
        MockJudge judge({MockPolicy::SeededRandom, 1.0, 0.5, "", 7, "mock"});
        auto ax = make_answer("q1", "mx", "alpha");
        auto ay = make_answer("q1", "my", "beta");
        auto v = judge_pair(judge, q, ax, ay, "tpl", 42);
        CHECK(v.winner == Winner::Tie);
    }

    SECTION("focal win_rate one always crowns the focal method") {
        MockJudge judge({MockPolicy::SeededRandom, 0.0, 1.0, "my", 7, "mock"});
        for (int i = 0; i < 20; ++i) {
            auto qq = make_question("q" + std::to_string(i));
            auto ax = make_answer(qq.question_id, "mx", "alpha");
            auto ay = make_answer(qq.question_id, "my", "beta");
            auto v = judge_pair(judge, qq, ax, ay, "tpl", 42);
            CHECK(v.winner_method == "my");
        }
    }

    SECTION("focal win rate is approximately honoured") {
        MockJudge judge({MockPolicy::SeededRandom, 0.0, 0.7, "mx", 7, "mock"});
        int wins = 0;
        const int n = 600;
        for (int i = 0; i < n; ++i) {
            auto qq = make_question("q" + std::to_string(i));
            auto ax = make_answer(qq.question_id, "mx", "alpha");
            auto ay = make_answer(qq.question_id, "my", "beta");
            auto v = judge_pair(judge, qq, ax, ay, "tpl", 42);
            if (v.winner_method == "mx") ++wins;
        }
        const double rate = static_cast<double>(wins) / n;
        CHECK(rate > 0.64);
        CHECK(rate < 0.76);
    }

    SECTION("absent focal method falls back to slot A") {
        MockJudge judge({MockPolicy::SeededRandom, 0.0, 1.0, "absent", 7, "mock"});
        auto ax = make_answer("q1", "mx", "alpha");
        auto ay = make_answer("q1", "my", "beta");
        auto v = judge_pair(judge, q, ax, ay, "tpl", 42);
        CHECK(v.winner == Winner::SlotA);
    }

    SECTION("verdicts are keyed to the pair, not the call order") {
        MockJudge judge({MockPolicy::SeededRandom, 0.2, 0.6, "mx", 7, "mock"});
        auto ax = make_answer("q1", "mx", "alpha");
        auto ay = make_answer("q1", "my", "beta");
        auto v1 = judge_pair(judge, q, ax, ay, "tpl", 42);
        auto v2 = judge_pair(judge, q, ax, ay, "tpl", 42);
        CHECK(v1.winner == v2.winner);
        CHECK(v1.raw_output == v2.raw_output);
    }

    SECTION("parameter validation") {
        CHECK_THROWS_AS(MockJudge({MockPolicy::SeededRandom, 1.5, 0.5, "", 0, "m"}), Error);
        CHECK_THROWS_AS(MockJudge({MockPolicy::SeededRandom, 0.0, -0.1, "", 0, "m"}), Error);
    }
}

TEST_CASE("run_comparison joins on shared questions and reports the rest") {
    std::vector<corpus::Question> questions;
    std::vector<AnswerRecord> answers;
    for (int i = 0; i < 6; ++i) {
        const std::string qid = "q" + std::to_string(i);
        questions.push_back(make_question(qid, "combo_" + std::to_string(i % 2)));
        if (qid != "q4") answers.push_back(make_answer(qid, "mx", "answer x " + qid));
        if (qid != "q5") answers.push_back(make_answer(qid, "my", "answer y " + qid));
    }

    MockJudge judge({MockPolicy::SeededRandom, 0.1, 0.6, "mx", 7, "mock"});
    auto res = run_comparison("mx", "my", questions, answers, judge, 42, "tpl");
    CHECK(res.verdicts.size() == 4);
    CHECK(res.missing_x == std::vector<std::string>{"q4"});
    CHECK(res.missing_y == std::vector<std::string>{"q5"});
    for (std::size_t i = 1; i < res.verdicts.size(); ++i)
        CHECK(res.verdicts[i - 1].pair_id < res.verdicts[i].pair_id);

    CHECK_THROWS_AS(run_comparison("mx", "mx", questions, answers, judge, 42, "tpl"), Error);
}

TEST_CASE("run_comparison output is independent of concurrency") {
    std::vector<corpus::Question> questions;
    std::vector<AnswerRecord> answers;
    for (int i = 0; i < 40; ++i) {
        const std::string qid = "q" + std::to_string(i);
        questions.push_back(make_question(qid, "combo_" + std::to_string(i % 5)));
        answers.push_back(make_answer(qid, "mx", "answer x " + qid));
        answers.push_back(make_answer(qid, "my", "answer y " + qid));
    }

    MockJudge j1({MockPolicy::SeededRandom, 0.15, 0.6, "mx", 7, "mock"});
    MockJudge j2({MockPolicy::SeededRandom, 0.15, 0.6, "mx", 7, "mock"});
    auto serial = run_comparison("mx", "my", questions, answers, j1, 42, "tpl", 1);
    auto parallel = run_comparison("mx", "my", questions, answers, j2, 42, "tpl", 4);

    REQUIRE(serial.verdicts.size() == parallel.verdicts.size());
    for (std::size_t i = 0; i < serial.verdicts.size(); ++i) {
        CHECK(serial.verdicts[i].pair_id == parallel.verdicts[i].pair_id);
        CHECK(serial.verdicts[i].winner_method == parallel.verdicts[i].winner_method);
        CHECK(serial.verdicts[i].method_a_slot == parallel.verdicts[i].method_a_slot);
        CHECK(serial.verdicts[i].raw_output == parallel.verdicts[i].raw_output);
    }
}

TEST_CASE("run_comparison propagates worker failures") {
    std::vector<corpus::Question> questions;
    std::vector<AnswerRecord> answers;
    for (int i = 0; i < 8; ++i) {
        const std::string qid = "q" + std::to_string(i);
        questions.push_back(make_question(qid));
        answers.push_back(make_answer(qid, "mx", "x"));
        answers.push_back(make_answer(qid, "my", "y"));
    }
    FlakyJudge dead(1000, "never");
    RetryPolicy quick;
    quick.transport_retries = 0;
    quick.backoff_ms = 0;
    try {
        run_comparison("mx", "my", questions, answers, dead, 42, "tpl", 4, quick);
        FAIL("expected transport error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TransportError);
    }
}

TEST_CASE("http judge speaks the wire contract") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    nlohmann::json seen_body;
    std::mutex seen_mutex;

    server.Post("/judge", [&](const httplib::Request& req, httplib::Response& res) {
        hits.fetch_add(1);
        {
            std::lock_guard<std::mutex> lock(seen_mutex);
            seen_auth = req.get_header_value("Authorization");
            seen_body = nlohmann::json::parse(req.body);
        }
        res.set_content("the first answer grounds its claims\nA", "text/plain");
    });
    server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        res.status = hits.fetch_add(1) < 2 ? 500 : 200;
        res.set_content("recovered\nB", "text/plain");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("GADMEC_TEST_JUDGE_TOKEN", "sekret-token", 1);

    SECTION("request carries auth, blinded fields, and returns the raw body") {
        HttpJudgeConfig cfg;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/judge";
        cfg.auth_env = "GADMEC_TEST_JUDGE_TOKEN";
        cfg.timeout_seconds = 10;
        HttpJudge judge(cfg);
        CHECK(judge.id() == "http");

        JudgeRequest req;
        req.question_text = "what changed?";
        req.answer_a = "answer one";
        req.answer_b = "answer two";
        req.template_id = "judge_prompt_v1";
        req.method_a = "should never appear on the wire";

        auto raw = judge.raw_verdict(req);
        CHECK(raw == "the first answer grounds its claims\nA");
        std::lock_guard<std::mutex> lock(seen_mutex);
        CHECK(seen_auth == "Bearer sekret-token");
        CHECK(seen_body.at("question") == "what changed?");
        CHECK(seen_body.at("answer_a") == "answer one");
        CHECK(seen_body.at("answer_b") == "answer two");
        CHECK(seen_body.at("template_id") == "judge_prompt_v1");
        CHECK(seen_body.size() == 4); // nothing else leaks, methods stay blind
    }

    SECTION("non-2xx responses surface as transport errors and retry") {
        hits.store(0);
        HttpJudgeConfig cfg;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/flaky";
        cfg.timeout_seconds = 10;
        HttpJudge judge(cfg);

        auto q = make_question("q1");
        auto ax = make_answer("q1", "mx", "alpha");
        auto ay = make_answer("q1", "my", "beta");
        RetryPolicy quick;
        quick.backoff_ms = 0;
        auto v = judge_pair(judge, q, ax, ay, "tpl", 42, quick);
        CHECK_FALSE(v.flagged_skip);
        CHECK(v.winner == Winner::SlotB);
        CHECK(hits.load() == 3); // two 500s then success
    }

    SECTION("unreachable endpoints raise transport errors") {
        HttpJudgeConfig cfg;
        cfg.endpoint = "http://127.0.0.1:9/judge"; // discard port, nothing listens
        cfg.timeout_seconds = 2;
        HttpJudge judge(cfg);
        JudgeRequest req;
        try {
            judge.raw_verdict(req);
            FAIL("expected transport error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TransportError);
        }
    }

    server.stop();
    listener.join();
}

TEST_CASE("http judge configuration is validated up front") {
    HttpJudgeConfig bad;
    bad.endpoint = "https://server/judge"; // TLS is not spoken
    CHECK_THROWS_AS(HttpJudge(bad), Error);
    bad.endpoint = "http://host:notaport/judge";
    CHECK_THROWS_AS(HttpJudge(bad), Error);
    bad.endpoint = "http:///judge";
    CHECK_THROWS_AS(HttpJudge(bad), Error);

    ::unsetenv("GADMEC_TEST_MISSING_TOKEN");
    HttpJudgeConfig no_env;
    no_env.endpoint = "http://127.0.0.1:8089/judge";
    no_env.auth_env = "GADMEC_TEST_MISSING_TOKEN";
    try {
        HttpJudge judge(no_env);
        FAIL("expected configuration error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigurationError);
    }
}
