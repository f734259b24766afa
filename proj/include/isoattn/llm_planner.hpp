// Copyright (c) 2026 the isoattn authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "isoattn/plan.hpp"

namespace isoattn {

struct LlmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Transport for one structured planning request; implementations post the
/// JSON body and return the raw response body.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& request_json) = 0;
};

struct HttpLlmConfig {
    std::string endpoint;  // http://host[:port][/path]
    std::string auth_token;
    int timeout_seconds = 30;
};

class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(HttpLlmConfig config);
    ~HttpLlmClient() override;
    std::string complete(const std::string& request_json) override;

private:
    HttpLlmConfig config_;
};

/// Asks the endpoint to decompose the storyline into characters and scenes,
/// then rebuilds the plan locally: present sets honor the endpoint's
/// character-scene mapping, but new/old bookkeeping is always recomputed from
/// scene order. Throws LlmError on transport or schema failures.
StoryPlan plan_with_llm(const std::string& storyline, LlmClient& client,
                        const std::string& prompt_template = {});

}  // namespace isoattn
