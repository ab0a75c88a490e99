#pragma once

// Grounded-QA metrics: rank-1 IoU / IoP, recall at thresholds, QA accuracy
// and grounded accuracy (correct answer with top-1 IoP >= 0.5).

#include <map>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvqa/core.hpp"

namespace gvqa {

inline constexpr double kGroundedIopThreshold = 0.5;

struct SampleScore {
  std::string qid;
  bool qa_correct = false;
  double top1_iou = 0.0;
  double top1_iop = 0.0;
  bool gqa_correct = false;
};

/// Scores the top-ranked predicted span against every ground-truth span and
/// keeps the best IoU and the best IoP. A zero-length top span scores 0 IoP.
SampleScore score_sample(std::string qid, std::optional<int> pred_answer,
                         std::span<const TimeSpan> pred_spans,
                         std::optional<int> gt_answer,
                         std::span<const TimeSpan> gt_spans);

struct Thresholds {
  std::vector<double> iou{0.3, 0.5, 0.7};
  std::vector<double> iop{0.3, 0.5};

  static Thresholds moment_retrieval() { return {{0.3, 0.5, 0.7}, {}}; }
};

/// Percentages in [0, 100] at full precision. QA and IoP fields are absent
/// for moment-retrieval reports.
struct MetricReport {
  size_t n = 0;
  std::optional<double> acc_qa;
  std::optional<double> acc_gqa;
  double m_iou = 0.0;
  std::optional<double> m_iop;
  std::map<double, double> r_iou;
  std::map<double, double> r_iop;
};

/// Throws std::invalid_argument on an empty sample list.
MetricReport aggregate(std::span<const SampleScore> samples,
                       const Thresholds& thresholds = {});

/// IoU family only.
MetricReport evaluate_mr(std::span<const SampleScore> samples,
                         const std::vector<double>& iou_thresholds = {0.3, 0.5, 0.7});

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

/// Fixed-width table, one decimal per value.
std::string format_table(const MetricReport& report);

std::string threshold_key(double theta);

}  // namespace gvqa
