#pragma once

// Single-path verification: every candidate span of a path is shown to the
// verifier in a zoomed window, its yes/no logits become a consistency score v,
// and spans are re-ranked by the product-of-experts score p = c * v.

#include <optional>
#include <span>
#include <vector>

#include "gvqa/paths.hpp"

namespace gvqa {

struct VerifiedSpan {
  TimeSpan span;
  double c = 0.0;  // grounder confidence
  double v = 0.0;  // verifier consistency
  double p = 0.0;  // c * v
};

struct VerifiedPathOutput {
  PathId path = PathId::GroundFirst;
  std::optional<AnswerChoice> answer;
  std::vector<VerifiedSpan> verified;  // poe_order
  std::optional<TimeSpan> best_span;
  double path_confidence = 0.0;
  std::string query_used;
};

struct ReflectSettings {
  double extend_ratio = 0.5;
  DecodeLimits limits{64, 64, 2.0};
};

/// sigmoid(logit_yes - logit_no)
double consistency_score(double logit_yes, double logit_no);

/// p descending, then higher c, then earlier start, then earlier end.
bool poe_order(const VerifiedSpan& a, const VerifiedSpan& b);

/// Product-of-experts re-scoring given one consistency score per span of
/// `path` (same order). The answer is carried through untouched.
VerifiedPathOutput rescore(const PathOutput& path, std::span<const double> consistency);

/// Reflection disabled: every span keeps its grounder confidence (v = 1).
VerifiedPathOutput without_verification(const PathOutput& path);

/// Queries the verifier once per span (ordinal = span index) with the path's
/// own query. A failed verifier call scores v = 0.
VerifiedPathOutput verify_path(AgentClient& agents, const QuestionItem& item,
                               const PathOutput& path,
                               const ReflectSettings& settings);

}  // namespace gvqa
