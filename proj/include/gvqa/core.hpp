#pragma once

// Temporal span algebra shared by the grounding, reflection and fusion stages.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvqa {

/// Closed interval [start, end] in seconds within a single video.
struct TimeSpan {
  double start = 0.0;
  double end = 0.0;

  double length() const { return end - start; }
  bool valid() const;

  friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
};

/// A span with the grounder's confidence in [0, 1].
struct ScoredSpan {
  TimeSpan span;
  double confidence = 0.0;

  friend bool operator==(const ScoredSpan&, const ScoredSpan&) = default;
};

struct VideoMeta {
  std::string video_id;
  double duration = 0.0;
};

/// Raised for arguments outside an operation's domain (e.g. IoP of a
/// zero-length prediction).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double intersection_length(const TimeSpan& a, const TimeSpan& b);

/// Temporal IoU. Defined as 0 when the union is empty.
double iou(const TimeSpan& a, const TimeSpan& b);

/// Intersection over prediction. Throws DomainError for a zero-length
/// prediction.
double iop(const TimeSpan& pred, const TimeSpan& gt);

TimeSpan clamp_span(const TimeSpan& s, double duration);

/// Grows `s` to (1 + ratio) times its length around the midpoint, then clamps
/// to [0, duration].
TimeSpan extend_span(const TimeSpan& s, double ratio, double duration);

/// Orders by confidence descending, then earlier start, then earlier end.
bool confidence_order(const ScoredSpan& a, const ScoredSpan& b);

/// Greedy 1-D non-maximum suppression. Output is sorted by `confidence_order`
/// and no two kept spans overlap with IoU above `iou_threshold`.
std::vector<ScoredSpan> nms(std::span<const ScoredSpan> spans,
                            double iou_threshold);

inline constexpr double kDefaultNmsIou = 0.75;

}  // namespace gvqa
