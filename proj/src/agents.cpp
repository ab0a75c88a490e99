#include "gvqa/agents.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <tuple>

#include "gvqa/wire.hpp"

namespace gvqa {

namespace {

constexpr std::array<std::string_view, 7> kWhWords = {
    "what", "when", "why", "how", "where", "who", "which"};
constexpr std::array<std::string_view, 10> kAuxiliaries = {
    "is", "are", "was", "were", "do", "does", "did", "has", "have", "had"};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

bool contains(auto const& list, std::string_view w) {
  return std::find(list.begin(), list.end(), w) != list.end();
}

bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

// Length of an option-letter prefix such as "(B) ", "B. " or "B) ", else 0.
size_t option_prefix_length(std::string_view s) {
  auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; };
  size_t n = 0;
  if (s.size() >= 3 && s[0] == '(' && alpha(s[1]) && s[2] == ')') {
    n = 3;
  } else if (s.size() >= 2 && alpha(s[0]) && (s[1] == '.' || s[1] == ')')) {
    n = 2;
  } else {
    return 0;
  }
  if (n == s.size() || std::isspace(static_cast<unsigned char>(s[n]))) return n;
  return 0;
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Grounder: return "grounder";
    case Role::Answerer: return "answerer";
    case Role::Gqa: return "gqa";
    case Role::Verifier: return "verifier";
  }
  return "unknown";
}

Role role_from_string(std::string_view name) {
  if (name == "grounder") return Role::Grounder;
  if (name == "answerer") return Role::Answerer;
  if (name == "gqa") return Role::Gqa;
  if (name == "verifier") return Role::Verifier;
  throw std::invalid_argument("unknown role '" + std::string(name) + "'");
}

PathId path_from_number(int n) {
  if (n < 1 || n > 3) {
    throw std::invalid_argument("path id must be 1, 2 or 3, got " +
                                std::to_string(n));
  }
  return static_cast<PathId>(n);
}

std::string build_ground_query(std::string_view question) {
  while (!question.empty() &&
         (question.back() == '?' || std::isspace(static_cast<unsigned char>(question.back())))) {
    question.remove_suffix(1);
  }
  auto words = split_words(question);
  size_t first = 0;
  if (!words.empty() && contains(kWhWords, lower(words[0]))) {
    first = 1;
    if (words.size() > 1 && contains(kAuxiliaries, lower(words[1]))) first = 2;
  }
  std::string clause;
  for (size_t i = first; i < words.size(); ++i) {
    if (!clause.empty()) clause += ' ';
    clause += i == first ? lower(words[i]) : words[i];
  }

  std::string query = "The moment when";
  if (!clause.empty()) query += " " + clause;
  return query;
}

std::string build_answer_augmented_query(std::string_view question,
                                         const AnswerChoice& answer) {
  std::string query = build_ground_query(question);
  const std::string norm = normalize_answer(answer.option_text);
  if (!norm.empty()) query += " " + norm;
  return query;
}

std::string normalize_answer(std::string_view text) {
  std::string_view s = text;
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  s.remove_prefix(option_prefix_length(s));

  std::string out;
  for (const auto& w : split_words(s)) {
    if (!out.empty()) out += ' ';
    out += lower(w);
  }
  while (!out.empty() && (is_terminal_punct(out.back()) || out.back() == ' ')) {
    out.pop_back();
  }
  return out;
}

void CallRecorder::record(TranscriptRecord rec) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(rec));
}

std::vector<TranscriptRecord> CallRecorder::take() {
  std::lock_guard lock(mu_);
  std::vector<TranscriptRecord> out = std::move(records_);
  records_.clear();
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tuple(path_number(a.path), static_cast<int>(a.role), a.ordinal) <
           std::tuple(path_number(b.path), static_cast<int>(b.role), b.ordinal);
  });
  return out;
}

AgentClient::AgentClient(AgentBackend& backend, CallRecorder* recorder,
                         std::optional<Clock::time_point> deadline)
    : backend_(backend), recorder_(recorder), deadline_(deadline) {}

template <typename Fn>
auto AgentClient::call(Role role, const CallContext& ctx, nlohmann::json request,
                       Fn&& fn) {
  TranscriptRecord rec{ctx.qid, ctx.path, role, ctx.ordinal, std::move(request),
                       nullptr, {}, 0.0};
  if (deadline_ && Clock::now() >= *deadline_) {
    rec.error = std::string(kDeadlineError) + " before " +
                std::string(to_string(role)) + " call";
    DeadlineExceeded err(rec.error);
    if (recorder_) recorder_->record(std::move(rec));
    throw err;
  }
  const auto t0 = Clock::now();
  try {
    auto [value, response] = fn();
    if (backend_.measures_latency()) {
      rec.latency_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
    rec.response = std::move(response);
    if (recorder_) recorder_->record(std::move(rec));
    return value;
  } catch (const std::exception& e) {
    if (backend_.measures_latency()) {
      rec.latency_ms =
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
    rec.error = e.what();
    if (recorder_) recorder_->record(std::move(rec));
    throw;
  }
}

std::vector<ScoredSpan> AgentClient::ground(const GroundRequest& req) {
  return call(Role::Grounder, req.ctx, wire::to_json(req), [&] {
    auto spans = backend_.ground(req);
    return std::pair(spans, wire::ground_response(spans));
  });
}

AnswerChoice AgentClient::answer(const AnswerRequest& req) {
  return call(Role::Answerer, req.ctx, wire::to_json(req), [&] {
    const int idx = backend_.answer(req);
    if (idx < 0 || idx >= static_cast<int>(req.options.size())) {
      throw TransportError("answerer returned out-of-range option " +
                           std::to_string(idx));
    }
    return std::pair(AnswerChoice{idx, req.options[idx]},
                     wire::answer_response(idx));
  });
}

GqaResponse AgentClient::gqa(const GqaRequest& req) {
  return call(Role::Gqa, req.ctx, wire::to_json(req), [&] {
    auto resp = backend_.gqa(req);
    if (resp.option_index < 0 ||
        resp.option_index >= static_cast<int>(req.options.size())) {
      throw TransportError("gqa agent returned out-of-range option " +
                           std::to_string(resp.option_index));
    }
    auto payload = wire::gqa_response(resp);
    return std::pair(std::move(resp), std::move(payload));
  });
}

VerifyResponse AgentClient::verify(const VerifyRequest& req) {
  return call(Role::Verifier, req.ctx, wire::to_json(req), [&] {
    auto resp = backend_.verify(req);
    return std::pair(resp, wire::verify_response(resp));
  });
}

std::vector<ScoredSpan> postprocess_spans(std::span<const ScoredSpan> raw,
                                          double duration,
                                          const GroundSettings& settings) {
  if (settings.top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  std::vector<ScoredSpan> clamped;
  clamped.reserve(raw.size());
  for (const auto& s : raw) {
    ScoredSpan c{clamp_span(s.span, duration),
                 std::clamp(s.confidence, 0.0, 1.0)};
    if (c.span.length() > 0.0) clamped.push_back(c);
  }
  auto kept = nms(clamped, settings.nms_iou);
  if (kept.size() > static_cast<size_t>(settings.top_n)) {
    kept.resize(settings.top_n);
  }
  return kept;
}

std::vector<ScoredSpan> ground(AgentClient& client, const GroundRequest& req,
                               const GroundSettings& settings) {
  const auto raw = client.ground(req);
  return postprocess_spans(raw, req.video.duration, settings);
}

}  // namespace gvqa
