#include "gvqa/core.hpp"

#include <algorithm>
#include <cmath>

namespace gvqa {

bool TimeSpan::valid() const {
  return std::isfinite(start) && std::isfinite(end) && start >= 0.0 &&
         start <= end;
}

double intersection_length(const TimeSpan& a, const TimeSpan& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

double iou(const TimeSpan& a, const TimeSpan& b) {
  const double inter = intersection_length(a, b);
  if (!(inter > 0.0)) return 0.0;
  // Overlapping spans: the union is the hull. Computing it this way keeps
  // iou <= iop exact under rounding.
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

double iop(const TimeSpan& pred, const TimeSpan& gt) {
  if (!(pred.length() > 0.0)) {
    throw DomainError("iop: prediction has zero length");
  }
  return intersection_length(pred, gt) / pred.length();
}

TimeSpan clamp_span(const TimeSpan& s, double duration) {
  TimeSpan out{std::clamp(s.start, 0.0, duration),
               std::clamp(s.end, 0.0, duration)};
  if (out.start > out.end) std::swap(out.start, out.end);
  return out;
}

TimeSpan extend_span(const TimeSpan& s, double ratio, double duration) {
  const double half = 0.5 * (1.0 + ratio) * s.length();
  const double mid = 0.5 * (s.start + s.end);
  // Outward rounding never shrinks the original span.
  TimeSpan grown{std::min(s.start, mid - half), std::max(s.end, mid + half)};
  return clamp_span(grown, duration);
}

bool confidence_order(const ScoredSpan& a, const ScoredSpan& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.span.start != b.span.start) return a.span.start < b.span.start;
  return a.span.end < b.span.end;
}

std::vector<ScoredSpan> nms(std::span<const ScoredSpan> spans,
                            double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw std::invalid_argument("nms: threshold must lie in (0, 1]");
  }
  std::vector<ScoredSpan> sorted(spans.begin(), spans.end());
  std::stable_sort(sorted.begin(), sorted.end(), confidence_order);

  std::vector<ScoredSpan> kept;
  kept.reserve(sorted.size());
  for (const auto& cand : sorted) {
    const bool suppressed =
        std::any_of(kept.begin(), kept.end(), [&](const ScoredSpan& k) {
          return iou(k.span, cand.span) > iou_threshold;
        });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

}  // namespace gvqa
