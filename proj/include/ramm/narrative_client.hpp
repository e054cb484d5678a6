#pragma once
// Client for an external narrative-distillation endpoint, plus the offline
// mode that reads narratives already present in the corpus.
//
// Request body:  {"model", "system_prompt", "user_prompt", "temperature", "image_ref"?}
// Response body: {"narrative": "<one sentence>"}

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ramm/corpus.hpp"
#include "ramm/error.hpp"
#include "ramm/narrative.hpp"

namespace ramm {

class NarrativeClientError : public Error {
public:
    NarrativeClientError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempt" + (attempts == 1 ? "" : "s") + ")"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

struct NarrativeClientConfig {
    std::string endpoint;  // e.g. http://localhost:8080/v1/narrative; empty means offline
    std::string api_key;
    std::string model = "qwen3-max";
    double temperature = kNarrativeTemperature;
    int max_attempts = 3;
    std::chrono::milliseconds retry_delay{200};
    std::chrono::seconds timeout{60};
    bool attach_media = false;  // send image_ref when the item carries one

    bool offline() const { return endpoint.empty(); }

    /// Reads RAMM_NARRATIVE_ENDPOINT, RAMM_NARRATIVE_API_KEY and RAMM_NARRATIVE_MODEL.
    static NarrativeClientConfig from_environment() {
        NarrativeClientConfig cfg;
        if (const char* e = std::getenv("RAMM_NARRATIVE_ENDPOINT")) cfg.endpoint = e;
        if (const char* k = std::getenv("RAMM_NARRATIVE_API_KEY")) cfg.api_key = k;
        if (const char* m = std::getenv("RAMM_NARRATIVE_MODEL")) cfg.model = m;
        return cfg;
    }
};

struct NarrativeRequest {
    std::string model;
    std::string system_prompt;
    std::string user_prompt;
    double temperature = kNarrativeTemperature;
    std::optional<std::string> image_ref;

    nlohmann::json to_json() const {
        nlohmann::json j{{"model", model},
                         {"system_prompt", system_prompt},
                         {"user_prompt", user_prompt},
                         {"temperature", temperature}};
        if (image_ref) j["image_ref"] = *image_ref;
        return j;
    }
};

class NarrativeClient {
public:
    explicit NarrativeClient(NarrativeClientConfig cfg = {}) : cfg_(std::move(cfg)) {
        if (!cfg_.offline()) split_endpoint();
    }

    const NarrativeClientConfig& config() const { return cfg_; }
    bool offline() const { return cfg_.offline(); }

    NarrativeRequest make_request(const NewsItem& item) const {
        const NarrativePrompt prompt = build_prompt_parts(item);
        NarrativeRequest req{cfg_.model, prompt.system, prompt.user, cfg_.temperature, std::nullopt};
        if (cfg_.attach_media && item.image_ref) req.image_ref = item.image_ref;
        return req;
    }

    /// Posts one request, retrying transport and server failures.
    std::string complete(const NarrativeRequest& req) const {
        if (offline()) throw Error("narrative client is in offline mode");
        const std::string body = req.to_json().dump();
        std::string last_error;
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            httplib::Client cli(base_);
            cli.set_connection_timeout(cfg_.timeout);
            cli.set_read_timeout(cfg_.timeout);
            httplib::Headers headers;
            if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
            auto res = cli.Post(path_, headers, body, "application/json");
            if (!res) {
                last_error = "request to " + cfg_.endpoint + " failed: " + httplib::to_string(res.error());
            } else if (res->status != 200) {
                last_error = "endpoint " + cfg_.endpoint + " returned HTTP " + std::to_string(res->status);
            } else {
                return parse_response(res->body, attempt);
            }
            if (attempt < cfg_.max_attempts) std::this_thread::sleep_for(cfg_.retry_delay);
        }
        throw NarrativeClientError(last_error, cfg_.max_attempts);
    }

private:
    static std::string parse_response(const std::string& body, int attempt) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error&) {
            throw NarrativeClientError("malformed narrative response", attempt);
        }
        auto it = j.find("narrative");
        if (it == j.end() || !it->is_string()) throw NarrativeClientError("response lacks a \"narrative\" string", attempt);
        std::string s = it->get<std::string>();
        const auto first = s.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) throw NarrativeClientError("empty narrative in response", attempt);
        s.erase(0, first);
        s.erase(s.find_last_not_of(" \t\r\n") + 1);
        return s;
    }

    void split_endpoint() {
        const std::string& url = cfg_.endpoint;
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw Error("narrative endpoint must be an absolute URL: " + url);
        if (url.compare(0, scheme_end, "http") != 0) {
            throw Error("unsupported narrative endpoint scheme (plain http only): " + url);
        }
        const auto path_begin = url.find('/', scheme_end + 3);
        base_ = url.substr(0, path_begin);
        path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
    }

    NarrativeClientConfig cfg_;
    std::string base_;
    std::string path_;
};

/// Narrative for one item: the corpus-supplied text in offline mode, the
/// endpoint's answer otherwise.
inline std::string extract_narrative(const NarrativeClient& client, const NewsItem& item) {
    if (client.offline()) {
        if (!item.narrative_text) throw Error("offline mode: item \"" + item.id + "\" has no narrative_text");
        return *item.narrative_text;
    }
    return client.complete(client.make_request(item));
}

/// Extracts narratives for many items with at most `parallelism` requests in
/// flight. Results are keyed by item id, so completion order does not matter.
inline std::map<std::string, std::string> extract_narratives(const NarrativeClient& client,
                                                             const std::vector<const NewsItem*>& items,
                                                             std::size_t parallelism = 4) {
    std::map<std::string, std::string> out;
    parallelism = std::max<std::size_t>(1, parallelism);
    for (std::size_t begin = 0; begin < items.size(); begin += parallelism) {
        const std::size_t end = std::min(items.size(), begin + parallelism);
        std::vector<std::future<std::string>> futures;
        for (std::size_t i = begin; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, [&client, item = items[i]] {
                return extract_narrative(client, *item);
            }));
        }
        for (std::size_t i = begin; i < end; ++i) out.emplace(items[i]->id, futures[i - begin].get());
    }
    return out;
}

}  // namespace ramm
