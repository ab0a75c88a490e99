#include "gvqa/reflect.hpp"

#include <algorithm>
#include <cmath>

namespace gvqa {

double consistency_score(double logit_yes, double logit_no) {
  const double d = logit_yes - logit_no;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

bool poe_order(const VerifiedSpan& a, const VerifiedSpan& b) {
  if (a.p != b.p) return a.p > b.p;
  if (a.c != b.c) return a.c > b.c;
  if (a.span.start != b.span.start) return a.span.start < b.span.start;
  return a.span.end < b.span.end;
}

VerifiedPathOutput rescore(const PathOutput& path,
                           std::span<const double> consistency) {
  if (consistency.size() != path.spans.size()) {
    throw std::invalid_argument("rescore: one consistency score per span required");
  }
  VerifiedPathOutput out;
  out.path = path.path;
  out.answer = path.answer;
  out.query_used = path.query_used;
  out.verified.reserve(path.spans.size());
  for (size_t k = 0; k < path.spans.size(); ++k) {
    const double c = path.spans[k].confidence;
    const double v = std::clamp(consistency[k], 0.0, 1.0);
    out.verified.push_back({path.spans[k].span, c, v, c * v});
  }
  std::stable_sort(out.verified.begin(), out.verified.end(), poe_order);
  if (!out.verified.empty()) {
    out.best_span = out.verified.front().span;
    out.path_confidence = out.verified.front().p;
  }
  return out;
}

VerifiedPathOutput without_verification(const PathOutput& path) {
  const std::vector<double> ones(path.spans.size(), 1.0);
  return rescore(path, ones);
}

VerifiedPathOutput verify_path(AgentClient& agents, const QuestionItem& item,
                               const PathOutput& path,
                               const ReflectSettings& settings) {
  std::vector<double> v(path.spans.size(), 0.0);
  for (size_t k = 0; k < path.spans.size(); ++k) {
    const TimeSpan& span = path.spans[k].span;
    VerifyRequest req{{item.qid, path.path, static_cast<int>(k)},
                      item.video,
                      path.query_used,
                      span,
                      extend_span(span, settings.extend_ratio, item.video.duration),
                      settings.limits};
    try {
      const auto resp = agents.verify(req);
      v[k] = consistency_score(resp.logit_yes, resp.logit_no);
    } catch (const DeadlineExceeded&) {
      throw;
    } catch (const std::exception&) {
      v[k] = 0.0;
    }
  }
  return rescore(path, v);
}

}  // namespace gvqa
