#include <algorithm>
#include <cmath>
#include <random>

#include "gvqa/backends.hpp"

namespace gvqa {

namespace {

// FNV-1a, stable across processes and platforms.
struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;

  Fnv1a& add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;  // field separator
    h *= 0x100000001b3ULL;
    return *this;
  }
  Fnv1a& add(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    return add(std::string_view(buf, 8));
  }
};

constexpr double kLogitClamp = 1e-12;

}  // namespace

void NoiseModel::validate() const {
  if (!(span_jitter >= 0.0) || !(conf_noise >= 0.0)) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  if (!(answer_accuracy >= 0.0 && answer_accuracy <= 1.0)) {
    throw std::invalid_argument("answer_accuracy must lie in [0, 1]");
  }
  if (raw_candidates < 1) {
    throw std::invalid_argument("raw_candidates must be >= 1");
  }
  if (!(misled_jitter_scale >= 0.0)) {
    throw std::invalid_argument("misled_jitter_scale must be non-negative");
  }
}

SyntheticBackend::SyntheticBackend(std::map<std::string, SyntheticTruth> truth,
                                   NoiseModel noise, std::uint64_t seed)
    : truth_(std::move(truth)), noise_(noise), seed_(seed) {
  noise_.validate();
}

const SyntheticTruth& SyntheticBackend::truth_for(const std::string& qid) const {
  auto it = truth_.find(qid);
  if (it == truth_.end()) {
    throw FixtureMissing("synthetic backend has no ground truth for '" + qid + "'");
  }
  return it->second;
}

std::uint64_t SyntheticBackend::key(const CallContext& ctx, Role role) const {
  return Fnv1a{}
      .add(seed_)
      .add(ctx.qid)
      .add(static_cast<std::uint64_t>(path_number(ctx.path)))
      .add(to_string(role))
      .add(static_cast<std::uint64_t>(ctx.ordinal))
      .h;
}

std::vector<ScoredSpan> SyntheticBackend::draw_spans(const SyntheticTruth& t,
                                                     const VideoMeta& v,
                                                     double jitter_scale,
                                                     std::uint64_t key) const {
  std::mt19937_64 rng(key);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double len = t.span.length();
  const double mid = 0.5 * (t.span.start + t.span.end);
  const double sigma = noise_.span_jitter * len * jitter_scale;

  std::vector<ScoredSpan> out;
  out.reserve(noise_.raw_candidates);
  for (int i = 0; i < noise_.raw_candidates; ++i) {
    const double c = mid + sigma * unit(rng);
    const double l = std::max(len + sigma * unit(rng), 0.05 * len);
    const TimeSpan span = clamp_span({c - 0.5 * l, c + 0.5 * l}, v.duration);
    const double conf =
        std::clamp(iou(span, t.span) + noise_.conf_noise * unit(rng), 0.0, 1.0);
    out.push_back({span, conf});
  }
  return out;
}

int SyntheticBackend::draw_answer(const SyntheticTruth& t, std::uint64_t key) const {
  std::mt19937_64 rng(key ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = static_cast<int>(t.options.size());
  if (n < 2 || u(rng) < noise_.answer_accuracy) return t.answer;
  std::uniform_int_distribution<int> pick(0, n - 2);
  const int k = pick(rng);
  return k < t.answer ? k : k + 1;
}

std::vector<ScoredSpan> SyntheticBackend::ground(const GroundRequest& req) {
  const auto& t = truth_for(req.ctx.qid);
  double scale = 1.0;
  if (req.query != build_ground_query(t.question)) {
    const AnswerChoice right{t.answer, t.options.at(t.answer)};
    if (req.query != build_answer_augmented_query(t.question, right)) {
      scale = noise_.misled_jitter_scale;
    }
  }
  return draw_spans(t, req.video, scale, key(req.ctx, Role::Grounder));
}

int SyntheticBackend::answer(const AnswerRequest& req) {
  return draw_answer(truth_for(req.ctx.qid), key(req.ctx, Role::Answerer));
}

GqaResponse SyntheticBackend::gqa(const GqaRequest& req) {
  const auto& t = truth_for(req.ctx.qid);
  const auto k = key(req.ctx, Role::Gqa);
  return {draw_answer(t, k), draw_spans(t, req.video, 1.0, k)};
}

VerifyResponse SyntheticBackend::verify(const VerifyRequest& req) {
  const auto& t = truth_for(req.ctx.qid);
  std::mt19937_64 rng(key(req.ctx, Role::Verifier));
  std::normal_distribution<double> unit(0.0, 1.0);
  double v = std::clamp(iou(req.span, t.span) + noise_.conf_noise * unit(rng),
                        0.0, 1.0);
  v = std::clamp(v, kLogitClamp, 1.0 - kLogitClamp);
  return {std::log(v / (1.0 - v)), 0.0};
}

}  // namespace gvqa
