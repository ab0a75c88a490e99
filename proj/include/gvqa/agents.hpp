#pragma once

// Agent roles, request/response types, query rewriting and the recorded call
// layer every reasoning path goes through.

#include <chrono>
#include <mutex>
#include <json.hpp>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gvqa/core.hpp"

namespace gvqa {

enum class Role { Grounder, Answerer, Gqa, Verifier };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

/// The three reasoning trajectories.
enum class PathId : int { GroundFirst = 1, AnswerFirst = 2, Joint = 3 };

inline int path_number(PathId p) { return static_cast<int>(p); }
PathId path_from_number(int n);

struct AnswerChoice {
  int option_index = 0;
  std::string option_text;

  friend bool operator==(const AnswerChoice&, const AnswerChoice&) = default;
};

struct DecodeLimits {
  int max_tokens = 64;
  int max_frames = 150;
  double fps = 1.0;
};

/// Per-role decode limits (max tokens, max frames, fps).
struct RoleLimits {
  DecodeLimits grounder{64, 150, 1.0};
  DecodeLimits gqa{64, 150, 1.0};
  DecodeLimits verifier{64, 64, 2.0};
  DecodeLimits answerer{256, 32, 2.0};
};

/// Identifies one agent call: (qid, path, role, ordinal) is unique per run.
struct CallContext {
  std::string qid;
  PathId path = PathId::GroundFirst;
  int ordinal = 0;
};

struct GroundRequest {
  CallContext ctx;
  VideoMeta video;
  std::string query;
  DecodeLimits limits;
};

struct AnswerRequest {
  CallContext ctx;
  VideoMeta video;
  std::string question;
  std::vector<std::string> options;
  std::optional<TimeSpan> clip;
  DecodeLimits limits;
};

struct GqaRequest {
  CallContext ctx;
  VideoMeta video;
  std::string question;
  std::vector<std::string> options;
  DecodeLimits limits;
};

struct GqaResponse {
  int option_index = 0;
  std::vector<ScoredSpan> spans;
};

/// `span` is the marked candidate; `clip` is the zoomed window shown around it.
struct VerifyRequest {
  CallContext ctx;
  VideoMeta video;
  std::string query;
  TimeSpan span;
  TimeSpan clip;
  DecodeLimits limits;
};

struct VerifyResponse {
  double logit_yes = 0.0;
  double logit_no = 0.0;
};

/// Retryable failure talking to a backend (network, non-2xx, bad payload).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scripted backend was asked something it has no fixture for.
class FixtureMissing : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Transcript error text of calls refused because the question ran out of time.
inline constexpr std::string_view kDeadlineError = "deadline exceeded";

class DeadlineExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One implementation serves all four roles. Implementations must accept
/// concurrent calls.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;

  virtual std::vector<ScoredSpan> ground(const GroundRequest& req) = 0;
  virtual int answer(const AnswerRequest& req) = 0;
  virtual GqaResponse gqa(const GqaRequest& req) = 0;
  virtual VerifyResponse verify(const VerifyRequest& req) = 0;

  /// Whether wall-clock latency is meaningful enough to put in transcripts.
  virtual bool measures_latency() const { return false; }
};

// Query rewriting -----------------------------------------------------------

/// "The moment when <core clause>", with the leading WH word and auxiliary
/// removed. Questions without a WH form are kept as the clause.
std::string build_ground_query(std::string_view question);

std::string build_answer_augmented_query(std::string_view question,
                                         const AnswerChoice& answer);

/// Drops an option-letter prefix ("(A)", "A.", "A)"), lowercases, collapses
/// whitespace and strips terminal punctuation.
std::string normalize_answer(std::string_view text);

// Recorded calls ------------------------------------------------------------

struct TranscriptRecord {
  std::string qid;
  PathId path = PathId::GroundFirst;
  Role role = Role::Grounder;
  int ordinal = 0;
  nlohmann::json request;
  nlohmann::json response;  // null when the call failed
  std::string error;
  double latency_ms = 0.0;
};

/// Thread-safe sink for the calls made while answering one question.
class CallRecorder {
 public:
  void record(TranscriptRecord rec);
  /// Records sorted by (path, role, ordinal).
  std::vector<TranscriptRecord> take();

 private:
  std::mutex mu_;
  std::vector<TranscriptRecord> records_;
};

/// Wraps a backend with transcript recording, a per-question deadline and
/// response validation.
class AgentClient {
 public:
  using Clock = std::chrono::steady_clock;

  explicit AgentClient(AgentBackend& backend, CallRecorder* recorder = nullptr,
                       std::optional<Clock::time_point> deadline = {});

  std::vector<ScoredSpan> ground(const GroundRequest& req);
  AnswerChoice answer(const AnswerRequest& req);
  GqaResponse gqa(const GqaRequest& req);
  VerifyResponse verify(const VerifyRequest& req);

 private:
  template <typename Fn>
  auto call(Role role, const CallContext& ctx, nlohmann::json request, Fn&& fn);

  AgentBackend& backend_;
  CallRecorder* recorder_;
  std::optional<Clock::time_point> deadline_;
};

struct GroundSettings {
  int top_n = 5;
  double nms_iou = kDefaultNmsIou;
};

/// clamp to the video, NMS, confidence order, truncate to top_n. Spans that
/// collapse to zero length after clamping are dropped.
std::vector<ScoredSpan> postprocess_spans(std::span<const ScoredSpan> raw,
                                          double duration,
                                          const GroundSettings& settings);

std::vector<ScoredSpan> ground(AgentClient& client, const GroundRequest& req,
                               const GroundSettings& settings);

}  // namespace gvqa
