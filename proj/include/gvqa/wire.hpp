#pragma once

// JSON payloads of the agent protocol. The same documents are sent to remote
// backends and written to transcripts.

#include <json.hpp>

#include "gvqa/agents.hpp"

namespace gvqa::wire {

using nlohmann::json;

json span_pair(const TimeSpan& s);
TimeSpan parse_span_pair(const json& j);

json to_json(const GroundRequest& req);
json to_json(const AnswerRequest& req);
json to_json(const GqaRequest& req);
json to_json(const VerifyRequest& req);

json ground_response(std::span<const ScoredSpan> spans);
json answer_response(int option_index);
json gqa_response(const GqaResponse& resp);
json verify_response(const VerifyResponse& resp);

// Parsers throw TransportError on malformed payloads.
std::vector<ScoredSpan> parse_ground_response(const json& j);
int parse_answer_response(const json& j);
GqaResponse parse_gqa_response(const json& j);
VerifyResponse parse_verify_response(const json& j);

// Request decoding, used by transcript replay and the mock backend.
VideoMeta parse_video(const json& req);
std::vector<std::string> parse_options(const json& req);

}  // namespace gvqa::wire
