#pragma once

// HTTP judge backend. The wire contract is deliberately minimal: POST a
// JSON body {question, answer_a, answer_b, template_id} to the configured
// endpoint; the response body is the raw judge output whose final line
// carries the verdict token. Auth is a bearer token read from an
// environment variable named in the config, never stored in files. Plain
// HTTP is spoken; TLS termination is left to a local proxy so the vendored
// client stays build-time simple.

#include <chrono>
#include <cstdlib>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gadmec/error.hpp"
#include "gadmec/judging.hpp"

namespace gadmec::judging {

struct HttpJudgeConfig {
    std::string endpoint;      // e.g. "http://127.0.0.1:8089/judge"
    std::string auth_env;      // env var holding the bearer token; empty = no auth
    std::string judge_id = "http";
    int rate_per_minute = 0;   // 0 = unlimited
    int timeout_seconds = 60;
};

class HttpJudge : public JudgeBackend {
  public:
    explicit HttpJudge(HttpJudgeConfig config) : config_(std::move(config)) {
        parse_endpoint();
        if (!config_.auth_env.empty()) {
            const char* token = std::getenv(config_.auth_env.c_str());
            if (!token)
                throw Error(ErrorCode::ConfigurationError,
                            "environment variable '" + config_.auth_env + "' is not set");
            bearer_ = token;
        }
    }

    std::string id() const override { return config_.judge_id; }

    std::string raw_verdict(const JudgeRequest& req) override {
        throttle();
        nlohmann::json body;
        body["question"] = req.question_text;
        body["answer_a"] = req.answer_a;
        body["answer_b"] = req.answer_b;
        body["template_id"] = req.template_id;

        httplib::Client client(host_, port_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        httplib::Headers headers;
        if (!bearer_.empty()) headers.emplace("Authorization", "Bearer " + bearer_);

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res)
            throw Error(ErrorCode::TransportError,
                        "no response from " + config_.endpoint + " (" +
                            httplib::to_string(res.error()) + ")");
        if (res->status < 200 || res->status >= 300)
            throw Error(ErrorCode::TransportError,
                        config_.endpoint + " returned status " + std::to_string(res->status));
        return res->body;
    }

  private:
    void parse_endpoint() {
        std::string rest = config_.endpoint;
        const std::string scheme = "http://";
        if (rest.rfind(scheme, 0) != 0)
            throw Error(ErrorCode::ConfigurationError,
                        "judge endpoint must start with http:// : '" + config_.endpoint + "'");
        rest = rest.substr(scheme.size());
        const auto slash = rest.find('/');
        std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
        path_ = slash == std::string::npos ? "/" : rest.substr(slash);
        const auto colon = hostport.find(':');
        if (colon == std::string::npos) {
            host_ = hostport;
            port_ = 80;
        } else {
            host_ = hostport.substr(0, colon);
            try {
                port_ = std::stoi(hostport.substr(colon + 1));
            } catch (const std::exception&) {
                throw Error(ErrorCode::ConfigurationError,
                            "bad port in endpoint '" + config_.endpoint + "'");
            }
        }
        if (host_.empty())
            throw Error(ErrorCode::ConfigurationError,
                        "no host in endpoint '" + config_.endpoint + "'");
    }

    void throttle() {
        if (config_.rate_per_minute <= 0) return;
        const auto min_gap =
            std::chrono::microseconds(60'000'000 / config_.rate_per_minute);
        std::unique_lock<std::mutex> lock(rate_mutex_);
        const auto now = std::chrono::steady_clock::now();
        if (have_last_ && now - last_request_ < min_gap) {
            const auto wait = min_gap - (now - last_request_);
            lock.unlock();
            std::this_thread::sleep_for(wait);
            lock.lock();
        }
        last_request_ = std::chrono::steady_clock::now();
        have_last_ = true;
    }

    HttpJudgeConfig config_;
    std::string host_;
    std::string path_;
    int port_ = 80;
    std::string bearer_;
    std::mutex rate_mutex_;
    std::chrono::steady_clock::time_point last_request_{};
    bool have_last_ = false;
};

} // namespace gadmec::judging
