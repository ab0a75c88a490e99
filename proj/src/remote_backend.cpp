#include <cmath>
#include <functional>
#include <httplib.h>
#include <thread>

#include "gvqa/backends.hpp"
#include "gvqa/wire.hpp"

namespace gvqa {

namespace {

// Splits "http://host:port/prefix" into ("http://host:port", "/prefix").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_begin = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = url.find('/', host_begin);
  if (slash == std::string::npos) return {url, ""};
  std::string prefix = url.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, slash), prefix};
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates p;
  p.grounder =
      "You are acting as the grounder now. Given a video and a text query, your "
      "goal is to temporally localize the video moment described by the query. "
      "If the query is directly describing a moment, simply localize it "
      "according to its content. Otherwise, if the moment is described as "
      "'before/after a pivotal event', you need to determine the actual event "
      "it refers to. The localized moment should only cover the target event. "
      "Now I give you the query: '{}'. Please think carefully and provide your "
      "response.";
  p.gqa =
      "You are acting as the GQA Agent now.\n"
      "Given a video and a multiple-choice question, you have two tasks:\n"
      "1) Trigger the video-moment retrieve pipeline to temporally localize the "
      "video moment described by the question by generating exactly "
      "<REG_TOKEN>.\n"
      "2) Choose the best answer from given options.\n\n"
      "Question: {}\n\n"
      "Options:\n{}\n\n"
      "Please reply exactly in this format:\n"
      "1) The relevant moment happens in <REG_TOKEN>\n"
      "2) Best choice: <Option>";
  p.verifier =
      "You are acting as the verifier now. You will be presented a text query "
      "describing a moment that potentially happens in the given video. Your "
      "task is to identify whether the video segment between <SEG_S_TOKEN> and "
      "<SEG_E_TOKEN> perfectly covers the moment. If the described moment can "
      "be seen in the video, please focus on verifying whether the moment "
      "starts at <SEG_S_TOKEN> and ends at <SEG_E_TOKEN>. Respond with 'Yes' if "
      "you think the moment boundaries are correct, otherwise 'No'. If the "
      "described moment cannot be seen in the video, respond with 'No' "
      "directly. Now I give you the query: '{}'. Please think carefully and "
      "respond with 'Yes' or 'No' directly.";
  return p;
}

std::string format_prompt(std::string_view tmpl,
                          const std::vector<std::string>& args) {
  std::string out;
  size_t next = 0;
  size_t pos = 0;
  while (true) {
    const auto hole = tmpl.find("{}", pos);
    if (hole == std::string_view::npos || next == args.size()) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, hole - pos));
    out.append(args[next++]);
    pos = hole + 2;
  }
  return out;
}

std::string format_options(const std::vector<std::string>& options) {
  std::string out;
  for (size_t i = 0; i < options.size(); ++i) {
    if (i) out += '\n';
    out += '(';
    out += static_cast<char>('A' + i % 26);
    out += ") ";
    out += options[i];
  }
  return out;
}

RemoteBackend::RemoteBackend(std::string base_url, RetryPolicy retry,
                             PromptTemplates prompts)
    : base_url_(std::move(base_url)), retry_(retry), prompts_(std::move(prompts)) {
  if (base_url_.empty()) throw std::invalid_argument("remote backend needs a URL");
}

nlohmann::json RemoteBackend::post(
    const std::string& endpoint, const nlohmann::json& body,
    const std::function<void(const nlohmann::json&)>& validate) const {
  const auto [origin, prefix] = split_url(base_url_);
  const std::string payload = body.dump();
  const auto timeout = std::chrono::duration<double>(retry_.timeout_s);
  std::string last_error;

  for (int attempt = 0; attempt <= retry_.retries; ++attempt) {
    if (attempt > 0) {
      const double delay =
          retry_.backoff_base_ms * std::pow(retry_.backoff_factor, attempt - 1);
      std::this_thread::sleep_for(
          std::chrono::duration<double, std::milli>(delay));
    }
    httplib::Client cli(origin);
    cli.set_connection_timeout(
        std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

    auto res = cli.Post(prefix + endpoint, payload, "application/json");
    if (!res) {
      last_error = "POST " + endpoint + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "POST " + endpoint + ": HTTP " + std::to_string(res->status);
      continue;
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      last_error = "POST " + endpoint + ": malformed JSON response";
      continue;
    }
    try {
      validate(parsed);
    } catch (const TransportError& e) {
      last_error = "POST " + endpoint + ": " + e.what();
      continue;
    }
    return parsed;
  }
  throw TransportError(last_error + " (after " + std::to_string(retry_.retries) +
                       " retries)");
}

std::vector<ScoredSpan> RemoteBackend::ground(const GroundRequest& req) {
  auto body = wire::to_json(req);
  body["prompt"] = format_prompt(prompts_.grounder, {req.query});
  return wire::parse_ground_response(
      post("/ground", body, [](const auto& j) { wire::parse_ground_response(j); }));
}

int RemoteBackend::answer(const AnswerRequest& req) {
  return wire::parse_answer_response(post(
      "/answer", wire::to_json(req),
      [](const auto& j) { wire::parse_answer_response(j); }));
}

GqaResponse RemoteBackend::gqa(const GqaRequest& req) {
  auto body = wire::to_json(req);
  body["prompt"] =
      format_prompt(prompts_.gqa, {req.question, format_options(req.options)});
  return wire::parse_gqa_response(
      post("/gqa", body, [](const auto& j) { wire::parse_gqa_response(j); }));
}

VerifyResponse RemoteBackend::verify(const VerifyRequest& req) {
  auto body = wire::to_json(req);
  body["prompt"] = format_prompt(prompts_.verifier, {req.query});
  return wire::parse_verify_response(
      post("/verify", body, [](const auto& j) { wire::parse_verify_response(j); }));
}

}  // namespace gvqa
