// Python bindings. Spans cross the boundary as (start, end) tuples and
// records as plain dicts; JSON-shaped values go through the json module.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gvqa/config.hpp"
#include "gvqa/pipeline.hpp"

namespace py = pybind11;
using namespace gvqa;
using nlohmann::json;

namespace {

using PySpan = std::pair<double, double>;
using PyScored = std::tuple<double, double, double>;

TimeSpan to_span(const PySpan& s) { return {s.first, s.second}; }
PySpan from_span(const TimeSpan& s) { return {s.start, s.end}; }

json to_json_value(const py::handle& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return json::parse(text);
}

py::object from_json_value(const json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig config_from(const py::object& cfg) {
  RunConfig c = cfg.is_none() ? RunConfig{} : config_from_json(to_json_value(cfg));
  return c;
}

std::vector<DatasetRecord> dataset_from(const py::list& records) {
  std::vector<DatasetRecord> out;
  for (const auto& r : records) out.push_back(dataset_record_from_json(to_json_value(r)));
  return out;
}

std::vector<Prediction> predictions_from(const py::list& preds) {
  std::vector<Prediction> out;
  for (const auto& p : preds) out.push_back(prediction_from_json(to_json_value(p)));
  return out;
}

template <typename T>
py::list to_list(const std::vector<T>& items) {
  py::list out;
  for (const auto& x : items) out.append(from_json_value(to_json(x)));
  return out;
}

// Path dict: {"path": 1..3, "answer": int | None, "spans": [(s, e, c, v), ...]}
VerifiedPathOutput verified_path_from(const py::dict& d) {
  PathOutput raw;
  raw.path = path_from_number(d["path"].cast<int>());
  if (d.contains("answer") && !d["answer"].is_none()) {
    raw.answer = AnswerChoice{d["answer"].cast<int>(), ""};
  }
  std::vector<double> v;
  for (const auto& s : d["spans"].cast<std::vector<std::tuple<double, double, double, double>>>()) {
    raw.spans.push_back({{std::get<0>(s), std::get<1>(s)}, std::get<2>(s)});
    v.push_back(std::get<3>(s));
  }
  return rescore(raw, v);
}

py::dict verified_path_dict(const VerifiedPathOutput& out) {
  py::list spans;
  for (const auto& s : out.verified) spans.append(py::make_tuple(s.span.start, s.span.end, s.c, s.v, s.p));
  py::dict d;
  d["path"] = path_number(out.path);
  d["answer"] = out.answer ? py::cast(out.answer->option_index) : py::none();
  d["spans"] = spans;
  d["best_span"] = out.best_span ? py::cast(from_span(*out.best_span)) : py::none();
  d["path_confidence"] = out.path_confidence;
  return d;
}

std::optional<Thresholds> thresholds_from(const std::optional<std::vector<double>>& iou_th,
                                          const std::optional<std::vector<double>>& iop_th) {
  if (!iou_th && !iop_th) return std::nullopt;
  Thresholds t;
  if (iou_th) t.iou = *iou_th;
  if (iop_th) t.iop = *iop_th;
  return t;
}

}  // namespace

PYBIND11_MODULE(_gvqa, m) {
  m.doc() = "Multi-path grounded video QA core";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  // Span algebra.
  m.def("iou", [](PySpan a, PySpan b) { return iou(to_span(a), to_span(b)); }, py::arg("a"),
        py::arg("b"));
  m.def("iop", [](PySpan pred, PySpan gt) { return iop(to_span(pred), to_span(gt)); },
        py::arg("pred"), py::arg("gt"));
  m.def("extend_span",
        [](PySpan s, double ratio, double duration) {
          return from_span(extend_span(to_span(s), ratio, duration));
        },
        py::arg("span"), py::arg("ratio") = 0.5, py::arg("duration"));
  m.def("nms",
        [](const std::vector<PyScored>& spans, double threshold) {
          std::vector<ScoredSpan> in;
          for (const auto& [s, e, c] : spans) in.push_back({{s, e}, c});
          std::vector<PyScored> out;
          for (const auto& x : nms(in, threshold)) out.emplace_back(x.span.start, x.span.end, x.confidence);
          return out;
        },
        py::arg("spans"), py::arg("iou_threshold") = kDefaultNmsIou);

  // Agent queries and reflection.
  m.def("build_ground_query", [](const std::string& q) { return build_ground_query(q); },
        py::arg("question"));
  m.def("build_answer_augmented_query",
        [](const std::string& q, int index, const std::string& text) {
          return build_answer_augmented_query(q, AnswerChoice{index, text});
        },
        py::arg("question"), py::arg("option_index"), py::arg("option_text"));
  m.def("consistency_score", &consistency_score, py::arg("logit_yes"), py::arg("logit_no"));
  m.def("rescore", [](const py::dict& path) { return verified_path_dict(verified_path_from(path)); },
        py::arg("path"));

  // Fusion.
  m.def("weighted_kmeans",
        [](const std::vector<PySpan>& points, const std::vector<double>& weights, int k,
           int max_iters, double eps, const std::string& init, std::uint64_t seed) {
          if (points.size() != weights.size()) throw std::invalid_argument("one weight per point");
          std::vector<SpanPoint> pts;
          for (size_t i = 0; i < points.size(); ++i) {
            pts.push_back({{points[i].first, points[i].second}, weights[i]});
          }
          const auto r = weighted_kmeans(pts, k, {max_iters, eps, kmeans_init_from_string(init), seed});
          std::vector<PySpan> centers;
          for (const auto& c : r.centers) centers.emplace_back(c[0], c[1]);
          py::dict d;
          d["centers"] = centers;
          d["assignment"] = r.assignment;
          d["iterations"] = r.iterations;
          d["converged"] = r.converged;
          d["objective_trace"] = r.objective_trace;
          return d;
        },
        py::arg("points"), py::arg("weights"), py::arg("k"), py::arg("max_iters") = 10,
        py::arg("eps") = 1e-6, py::arg("init") = "farthest_first", py::arg("seed") = 0);
  m.def("fuse",
        [](const py::list& paths, int k, int report_k, const std::string& voting) {
          std::vector<VerifiedPathOutput> in;
          for (const auto& p : paths) in.push_back(verified_path_from(p.cast<py::dict>()));
          FusionOptions o;
          o.k = k;
          o.report_k = report_k;
          o.voting = voting_from_string(voting);
          const auto r = fuse(in, o);
          std::vector<PyScored> spans;
          for (const auto& s : r.spans) spans.emplace_back(s.span.start, s.span.end, s.weight);
          py::dict d;
          d["answer"] = r.answer ? py::cast(r.answer->option_index) : py::none();
          d["spans"] = spans;
          d["k_effective"] = r.k_effective;
          return d;
        },
        py::arg("paths"), py::arg("k") = 5, py::arg("report_k") = 3,
        py::arg("voting") = "span_level");

  // Metrics.
  m.def("score_sample",
        [](std::optional<int> pred_answer, const std::vector<PySpan>& pred_spans,
           std::optional<int> gt_answer, const std::vector<PySpan>& gt_spans) {
          std::vector<TimeSpan> p, g;
          for (const auto& s : pred_spans) p.push_back(to_span(s));
          for (const auto& s : gt_spans) g.push_back(to_span(s));
          const auto r = score_sample("", pred_answer, p, gt_answer, g);
          py::dict d;
          d["qa_correct"] = r.qa_correct;
          d["top1_iou"] = r.top1_iou;
          d["top1_iop"] = r.top1_iop;
          d["gqa_correct"] = r.gqa_correct;
          return d;
        },
        py::arg("pred_answer"), py::arg("pred_spans"), py::arg("gt_answer"), py::arg("gt_spans"));
  m.def("evaluate",
        [](const py::list& dataset, const py::list& predictions,
           std::optional<std::vector<double>> iou_th, std::optional<std::vector<double>> iop_th) {
          const auto report = evaluate_predictions(dataset_from(dataset), predictions_from(predictions),
                                                   thresholds_from(iou_th, iop_th));
          return from_json_value(to_json(report));
        },
        py::arg("dataset"), py::arg("predictions"), py::arg("iou_thresholds") = py::none(),
        py::arg("iop_thresholds") = py::none());

  // Pipeline.
  m.def("synthetic_dataset",
        [](int n, std::uint64_t seed) { return to_list(make_synthetic_dataset(n, seed)); },
        py::arg("n"), py::arg("seed") = 0);
  m.def("default_config", [] { return from_json_value(to_json(RunConfig{})); });
  m.def("run",
        [](const py::list& dataset, const py::object& config) {
          const auto data = dataset_from(dataset);
          const auto c = config_from(config);
          RunResult run;
          {
            py::gil_scoped_release release;
            auto backend = make_backend(c, data);
            run = run_pipeline(c, data, *backend);
          }
          py::dict d;
          d["predictions"] = to_list(run.predictions);
          d["transcripts"] = to_list(run.transcripts);
          d["failed"] = run.failed;
          return d;
        },
        py::arg("dataset"), py::arg("config") = py::none());
  m.def("fuse_replay",
        [](const py::list& transcripts, const py::object& config) {
          std::vector<TranscriptRecord> t;
          for (const auto& x : transcripts) t.push_back(transcript_record_from_json(to_json_value(x)));
          const auto r = fuse_replay(t, config_from(config));
          py::dict d;
          d["predictions"] = to_list(r.predictions);
          d["warnings"] = r.warnings;
          return d;
        },
        py::arg("transcripts"), py::arg("config") = py::none());
  m.def("simulate",
        [](int n, const std::vector<std::uint64_t>& seeds, double span_jitter, double conf_noise,
           double answer_accuracy, const py::object& config) {
          NoiseModel noise;
          noise.span_jitter = span_jitter;
          noise.conf_noise = conf_noise;
          noise.answer_accuracy = answer_accuracy;
          const auto base = config_from(config);
          SimulationResult sim;
          {
            py::gil_scoped_release release;
            sim = simulate(n, seeds, noise, base);
          }
          auto d = from_json_value(to_json(sim));
          d["table"] = format_ablation_table(sim);
          return d;
        },
        py::arg("n"), py::arg("seeds"), py::arg("span_jitter") = 0.15,
        py::arg("conf_noise") = 0.1, py::arg("answer_accuracy") = 0.75,
        py::arg("config") = py::none());
}
