#pragma once

// Backend implementations: scripted fixtures, a seeded synthetic noise model
// and a JSON/HTTP client for remote model servers.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gvqa/agents.hpp"

namespace gvqa {

// Scripted --------------------------------------------------------------------

/// A fixture answers requests of `role` whose wire payload contains every
/// field of `match` with an equal value. Either `response` or `error` is set.
struct MockFixture {
  Role role = Role::Grounder;
  nlohmann::json match;
  nlohmann::json response;
  std::string error;
};

/// Replays fixtures verbatim. Unmatched requests throw FixtureMissing; fixtures
/// carrying `error` throw TransportError.
class MockBackend final : public AgentBackend {
 public:
  explicit MockBackend(std::vector<MockFixture> fixtures);

  /// JSONL: {"role": ..., "match": {...}, "response": {...} | "error": "..."}
  static MockBackend from_jsonl(const std::filesystem::path& path);

  std::vector<ScoredSpan> ground(const GroundRequest& req) override;
  int answer(const AnswerRequest& req) override;
  GqaResponse gqa(const GqaRequest& req) override;
  VerifyResponse verify(const VerifyRequest& req) override;

 private:
  const nlohmann::json& lookup(Role role, const nlohmann::json& request) const;

  std::vector<MockFixture> fixtures_;
};

// Synthetic -------------------------------------------------------------------

struct SyntheticTruth {
  std::string question;
  std::vector<std::string> options;
  int answer = 0;
  TimeSpan span;
};

/// Noise model of the synthetic agents.
///
/// Each grounder candidate is the ground-truth span with its centre and its
/// length independently perturbed by N(0, span_jitter * gt_length). The
/// confidence is iou(candidate, gt) plus N(0, conf_noise), clamped to [0, 1].
/// The verifier returns logits with sigmoid(yes - no) equal to
/// clamp(iou(span, gt) + N(0, conf_noise), 0, 1). Answers are correct with
/// probability answer_accuracy, otherwise a uniformly drawn wrong option.
/// A grounding query that carries a wrong answer multiplies the jitter by
/// misled_jitter_scale.
struct NoiseModel {
  double span_jitter = 0.0;
  double conf_noise = 0.0;
  double answer_accuracy = 1.0;
  int raw_candidates = 10;
  double misled_jitter_scale = 2.0;

  void validate() const;
};

/// Every draw is a pure function of (seed, qid, path, role, ordinal), so the
/// output does not depend on call interleaving.
class SyntheticBackend final : public AgentBackend {
 public:
  SyntheticBackend(std::map<std::string, SyntheticTruth> truth, NoiseModel noise,
                   std::uint64_t seed);

  std::vector<ScoredSpan> ground(const GroundRequest& req) override;
  int answer(const AnswerRequest& req) override;
  GqaResponse gqa(const GqaRequest& req) override;
  VerifyResponse verify(const VerifyRequest& req) override;

 private:
  const SyntheticTruth& truth_for(const std::string& qid) const;
  std::vector<ScoredSpan> draw_spans(const SyntheticTruth& t, const VideoMeta& v,
                                     double jitter_scale, std::uint64_t key) const;
  int draw_answer(const SyntheticTruth& t, std::uint64_t key) const;
  std::uint64_t key(const CallContext& ctx, Role role) const;

  std::map<std::string, SyntheticTruth> truth_;
  NoiseModel noise_;
  std::uint64_t seed_;
};

// Remote ----------------------------------------------------------------------

struct PromptTemplates {
  std::string grounder;
  std::string gqa;
  std::string verifier;

  static PromptTemplates defaults();
};

/// Replaces successive "{}" placeholders with `args`.
std::string format_prompt(std::string_view tmpl,
                          const std::vector<std::string>& args);

/// "(A) first\n(B) second\n..."
std::string format_options(const std::vector<std::string>& options);

struct RetryPolicy {
  int retries = 3;
  int backoff_base_ms = 250;
  double backoff_factor = 2.0;
  double timeout_s = 30.0;
};

/// POSTs JSON to {base_url}/ground, /answer, /gqa and /verify.
class RemoteBackend final : public AgentBackend {
 public:
  RemoteBackend(std::string base_url, RetryPolicy retry,
                PromptTemplates prompts = PromptTemplates::defaults());

  std::vector<ScoredSpan> ground(const GroundRequest& req) override;
  int answer(const AnswerRequest& req) override;
  GqaResponse gqa(const GqaRequest& req) override;
  VerifyResponse verify(const VerifyRequest& req) override;

  bool measures_latency() const override { return true; }

 private:
  /// Retries transport failures, non-2xx statuses and payloads rejected by
  /// `validate`.
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body,
                      const std::function<void(const nlohmann::json&)>& validate) const;

  std::string base_url_;
  RetryPolicy retry_;
  PromptTemplates prompts_;
};

}  // namespace gvqa
