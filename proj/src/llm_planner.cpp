// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#include "isoattn/llm_planner.hpp"

#include <map>

#include "httplib.h"
#include "json.hpp"

namespace isoattn {

using nlohmann::json;

namespace {

constexpr const char* kDefaultInstructions =
    "Decompose the storyline into a short sequence of visual scene prompts and one "
    "appearance prompt per character. Every scene prompt must mention each present "
    "character by name, spelled exactly as declared. Respond with JSON matching "
    "response_schema.";

struct ParsedEndpoint {
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    const std::string prefix = "http://";
    if (endpoint.rfind(prefix, 0) != 0) {
        throw LlmError("llm: endpoint must use http:// (got '" + endpoint + "')");
    }
    ParsedEndpoint parsed;
    std::string rest = endpoint.substr(prefix.size());
    const size_t slash = rest.find('/');
    std::string authority = rest.substr(0, slash);
    if (slash != std::string::npos) {
        parsed.path = rest.substr(slash);
    }
    const size_t colon = authority.find(':');
    if (colon == std::string::npos) {
        parsed.host = authority;
    } else {
        parsed.host = authority.substr(0, colon);
        try {
            parsed.port = std::stoi(authority.substr(colon + 1));
        } catch (const std::exception&) {
            throw LlmError("llm: invalid port in endpoint '" + endpoint + "'");
        }
    }
    if (parsed.host.empty()) {
        throw LlmError("llm: endpoint host is empty");
    }
    return parsed;
}

}  // namespace

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {}
HttpLlmClient::~HttpLlmClient() = default;

std::string HttpLlmClient::complete(const std::string& request_json) {
    const ParsedEndpoint endpoint = parse_endpoint(config_.endpoint);
    httplib::Client client(endpoint.host, endpoint.port);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.auth_token);
    }
    auto res = client.Post(endpoint.path, headers, request_json, "application/json");
    if (!res) {
        throw LlmError("llm: endpoint unreachable (" +
                       std::string(httplib::to_string(res.error())) + ")");
    }
    if (res->status != 200) {
        throw LlmError("llm: endpoint returned status " + std::to_string(res->status));
    }
    return res->body;
}

StoryPlan plan_with_llm(const std::string& storyline, LlmClient& client,
                        const std::string& prompt_template) {
    if (storyline.empty()) {
        throw std::invalid_argument("plan_with_llm: storyline is empty");
    }
    const json request = {
        {"task", "story_plan"},
        {"instructions", prompt_template.empty() ? kDefaultInstructions : prompt_template},
        {"storyline", storyline},
        {"response_schema",
         {{"characters", json::array({{{"name", "string"}, {"prompt", "string"}}})},
          {"scenes",
           json::array({{{"prompt", "string"},
                         {"present", json::array({"character name"})}}})}}},
    };

    const std::string body = client.complete(request.dump());
    json response;
    try {
        response = json::parse(body);
    } catch (const json::exception& e) {
        throw LlmError(std::string("llm: response is not valid JSON: ") + e.what());
    }

    std::vector<CharacterSpec> characters;
    std::map<std::string, int> by_name;
    std::vector<SceneDraft> drafts;
    try {
        for (const auto& c : response.at("characters")) {
            CharacterSpec spec;
            spec.name = c.at("name").get<std::string>();
            spec.prompt = c.at("prompt").get<std::string>();
            if (spec.name.empty() || spec.prompt.empty()) {
                throw LlmError("llm: response contains an empty character name or prompt");
            }
            if (by_name.count(spec.name)) {
                throw LlmError("llm: response repeats character '" + spec.name + "'");
            }
            by_name[spec.name] = static_cast<int>(characters.size());
            characters.push_back(std::move(spec));
        }
        for (const auto& s : response.at("scenes")) {
            SceneDraft draft;
            draft.prompt = s.at("prompt").get<std::string>();
            if (s.contains("present")) {
                std::vector<int> cast;
                for (const auto& name : s.at("present")) {
                    auto it = by_name.find(name.get<std::string>());
                    if (it == by_name.end()) {
                        throw LlmError("llm: scene lists undeclared character '" +
                                       name.get<std::string>() + "'");
                    }
                    cast.push_back(it->second);
                }
                draft.cast = std::move(cast);
            }
            // Any "new"/"old" bookkeeping in the response is ignored; it is
            // recomputed from scene order below.
            drafts.push_back(std::move(draft));
        }
    } catch (const json::exception& e) {
        throw LlmError(std::string("llm: response failed schema validation: ") + e.what());
    }

    StoryPlan plan;
    try {
        plan = build_plan(std::move(characters), std::move(drafts));
    } catch (const std::invalid_argument& e) {
        throw LlmError(std::string("llm: recomputed plan violates invariants: ") + e.what());
    }
    const auto diags = validate_plan(plan);
    if (!diags.empty()) {
        throw LlmError("llm: recomputed plan violates invariants: " + diags.front());
    }
    return plan;
}

}  // namespace isoattn
