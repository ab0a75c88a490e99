#include "gvqa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace gvqa {

SampleScore score_sample(std::string qid, std::optional<int> pred_answer,
                         std::span<const TimeSpan> pred_spans,
                         std::optional<int> gt_answer,
                         std::span<const TimeSpan> gt_spans) {
  SampleScore s;
  s.qid = std::move(qid);
  s.qa_correct = pred_answer && gt_answer && *pred_answer == *gt_answer;
  if (!pred_spans.empty()) {
    const TimeSpan& top = pred_spans.front();
    for (const auto& gt : gt_spans) {
      s.top1_iou = std::max(s.top1_iou, iou(top, gt));
      if (top.length() > 0.0) s.top1_iop = std::max(s.top1_iop, iop(top, gt));
    }
  }
  s.gqa_correct = s.qa_correct && s.top1_iop >= kGroundedIopThreshold;
  return s;
}

namespace {

double percent(size_t hits, size_t n) {
  return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

double mean_percent(std::span<const SampleScore> samples, double SampleScore::*field) {
  double sum = 0.0;
  for (const auto& s : samples) sum += s.*field;
  return 100.0 * sum / static_cast<double>(samples.size());
}

std::map<double, double> recalls(std::span<const SampleScore> samples,
                                 double SampleScore::*field,
                                 const std::vector<double>& thresholds) {
  std::map<double, double> out;
  for (double theta : thresholds) {
    const auto hits = std::count_if(samples.begin(), samples.end(),
                                    [&](const SampleScore& s) { return s.*field >= theta; });
    out[theta] = percent(static_cast<size_t>(hits), samples.size());
  }
  return out;
}

std::string fmt1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

MetricReport aggregate(std::span<const SampleScore> samples, const Thresholds& thresholds) {
  if (samples.empty()) throw std::invalid_argument("aggregate: no samples");
  MetricReport r;
  r.n = samples.size();
  const auto qa = std::count_if(samples.begin(), samples.end(),
                                [](const SampleScore& s) { return s.qa_correct; });
  const auto gqa = std::count_if(samples.begin(), samples.end(),
                                 [](const SampleScore& s) { return s.gqa_correct; });
  r.acc_qa = percent(static_cast<size_t>(qa), r.n);
  r.acc_gqa = percent(static_cast<size_t>(gqa), r.n);
  r.m_iou = mean_percent(samples, &SampleScore::top1_iou);
  r.m_iop = mean_percent(samples, &SampleScore::top1_iop);
  r.r_iou = recalls(samples, &SampleScore::top1_iou, thresholds.iou);
  r.r_iop = recalls(samples, &SampleScore::top1_iop, thresholds.iop);
  return r;
}

MetricReport evaluate_mr(std::span<const SampleScore> samples,
                         const std::vector<double>& iou_thresholds) {
  if (samples.empty()) throw std::invalid_argument("evaluate_mr: no samples");
  MetricReport r;
  r.n = samples.size();
  r.m_iou = mean_percent(samples, &SampleScore::top1_iou);
  r.r_iou = recalls(samples, &SampleScore::top1_iou, iou_thresholds);
  return r;
}

std::string threshold_key(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", theta);
  return buf;
}

nlohmann::json to_json(const MetricReport& report) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  auto recall_map = [](const std::map<double, double>& m) {
    json j = json::object();
    for (const auto& [theta, v] : m) j[threshold_key(theta)] = v;
    return j;
  };
  json j;
  j["n"] = report.n;
  j["acc_qa"] = opt(report.acc_qa);
  j["acc_gqa"] = opt(report.acc_gqa);
  j["m_iou"] = report.m_iou;
  j["m_iop"] = opt(report.m_iop);
  j["r_iou"] = recall_map(report.r_iou);
  j["r_iop"] = recall_map(report.r_iop);
  return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
  };
  auto recall_map = [&](const char* key) {
    std::map<double, double> m;
    if (auto it = j.find(key); it != j.end()) {
      for (const auto& [k, v] : it->items()) m[std::stod(k)] = v.get<double>();
    }
    return m;
  };
  MetricReport r;
  r.n = j.at("n").get<size_t>();
  r.acc_qa = opt("acc_qa");
  r.acc_gqa = opt("acc_gqa");
  r.m_iou = j.at("m_iou").get<double>();
  r.m_iop = opt("m_iop");
  r.r_iou = recall_map("r_iou");
  r.r_iop = recall_map("r_iop");
  return r;
}

std::string format_table(const MetricReport& report) {
  std::vector<std::pair<std::string, double>> cols;
  for (const auto& [theta, v] : report.r_iou) cols.emplace_back("IoU@" + threshold_key(theta), v);
  cols.emplace_back("mIoU", report.m_iou);
  for (const auto& [theta, v] : report.r_iop) cols.emplace_back("IoP@" + threshold_key(theta), v);
  if (report.m_iop) cols.emplace_back("mIoP", *report.m_iop);
  if (report.acc_qa) cols.emplace_back("Acc@QA", *report.acc_qa);
  if (report.acc_gqa) cols.emplace_back("Acc@GQA", *report.acc_gqa);

  std::ostringstream head;
  std::ostringstream row;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%6s", "n");
  head << buf;
  std::snprintf(buf, sizeof buf, "%6zu", report.n);
  row << buf;
  for (const auto& [name, v] : cols) {
    std::snprintf(buf, sizeof buf, " %9s", name.c_str());
    head << buf;
    std::snprintf(buf, sizeof buf, " %9s", fmt1(v).c_str());
    row << buf;
  }
  return head.str() + "\n" + row.str() + "\n";
}

}  // namespace gvqa
