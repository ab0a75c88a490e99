#include "gvqa/wire.hpp"

#include <cmath>

namespace gvqa::wire {

namespace {

void put_limits(json& j, const DecodeLimits& l) {
  j["max_frames"] = l.max_frames;
  j["fps"] = l.fps;
  j["max_tokens"] = l.max_tokens;
}

json video_fields(const VideoMeta& v) {
  return json{{"video", v.video_id}, {"duration", v.duration}};
}

double number_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw TransportError(std::string("malformed response: missing number '") +
                         key + "'");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw TransportError(std::string("malformed response: non-finite '") +
                         key + "'");
  }
  return v;
}

int index_field(const json& j) {
  auto it = j.find("option_index");
  if (it == j.end() || !it->is_number_integer()) {
    throw TransportError("malformed response: missing integer 'option_index'");
  }
  return it->get<int>();
}

std::vector<ScoredSpan> spans_field(const json& j) {
  auto it = j.find("spans");
  if (it == j.end() || !it->is_array()) {
    throw TransportError("malformed response: missing array 'spans'");
  }
  std::vector<ScoredSpan> out;
  out.reserve(it->size());
  for (const auto& s : *it) {
    if (!s.is_object()) throw TransportError("malformed response: bad span");
    ScoredSpan sc{{number_field(s, "start"), number_field(s, "end")},
                  number_field(s, "confidence")};
    if (sc.span.start > sc.span.end) std::swap(sc.span.start, sc.span.end);
    out.push_back(sc);
  }
  return out;
}

}  // namespace

json span_pair(const TimeSpan& s) { return json::array({s.start, s.end}); }

TimeSpan parse_span_pair(const json& j) {
  if (!j.is_array() || j.size() < 2 || !j[0].is_number() || !j[1].is_number()) {
    throw std::invalid_argument("expected [start, end]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json to_json(const GroundRequest& req) {
  json j = video_fields(req.video);
  j["query"] = req.query;
  put_limits(j, req.limits);
  return j;
}

json to_json(const AnswerRequest& req) {
  json j = video_fields(req.video);
  j["question"] = req.question;
  j["options"] = req.options;
  j["clip"] = req.clip ? span_pair(*req.clip) : json(nullptr);
  put_limits(j, req.limits);
  return j;
}

json to_json(const GqaRequest& req) {
  json j = video_fields(req.video);
  j["question"] = req.question;
  j["options"] = req.options;
  put_limits(j, req.limits);
  return j;
}

json to_json(const VerifyRequest& req) {
  json j = video_fields(req.video);
  j["query"] = req.query;
  j["span"] = span_pair(req.span);
  j["clip"] = span_pair(req.clip);
  put_limits(j, req.limits);
  return j;
}

json ground_response(std::span<const ScoredSpan> spans) {
  json arr = json::array();
  for (const auto& s : spans) {
    arr.push_back(
        {{"start", s.span.start}, {"end", s.span.end}, {"confidence", s.confidence}});
  }
  return json{{"spans", std::move(arr)}};
}

json answer_response(int option_index) {
  return json{{"option_index", option_index}};
}

json gqa_response(const GqaResponse& resp) {
  json j = ground_response(resp.spans);
  j["option_index"] = resp.option_index;
  return j;
}

json verify_response(const VerifyResponse& resp) {
  return json{{"logit_yes", resp.logit_yes}, {"logit_no", resp.logit_no}};
}

std::vector<ScoredSpan> parse_ground_response(const json& j) {
  if (!j.is_object()) throw TransportError("malformed response: not an object");
  return spans_field(j);
}

int parse_answer_response(const json& j) {
  if (!j.is_object()) throw TransportError("malformed response: not an object");
  return index_field(j);
}

GqaResponse parse_gqa_response(const json& j) {
  if (!j.is_object()) throw TransportError("malformed response: not an object");
  return {index_field(j), spans_field(j)};
}

VerifyResponse parse_verify_response(const json& j) {
  if (!j.is_object()) throw TransportError("malformed response: not an object");
  return {number_field(j, "logit_yes"), number_field(j, "logit_no")};
}

VideoMeta parse_video(const json& req) {
  return {req.at("video").get<std::string>(), req.at("duration").get<double>()};
}

std::vector<std::string> parse_options(const json& req) {
  return req.at("options").get<std::vector<std::string>>();
}

}  // namespace gvqa::wire
