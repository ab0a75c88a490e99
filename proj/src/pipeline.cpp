#include "gvqa/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "gvqa/wire.hpp"

namespace gvqa {

QuestionItem to_item(const DatasetRecord& record) {
  return {record.qid, {record.video, record.duration}, record.question, record.options};
}

std::map<std::string, SyntheticTruth> synthetic_truth(std::span<const DatasetRecord> dataset) {
  std::map<std::string, SyntheticTruth> truth;
  for (const auto& r : dataset) {
    if (!r.answer || r.spans.empty()) continue;
    truth[r.qid] = {r.question, r.options, *r.answer, r.spans.front()};
  }
  return truth;
}

std::unique_ptr<AgentBackend> make_backend(const RunConfig& config,
                                           std::span<const DatasetRecord> dataset) {
  switch (config.backend) {
    case BackendKind::Synthetic:
      return std::make_unique<SyntheticBackend>(synthetic_truth(dataset), config.noise,
                                                config.seed);
    case BackendKind::Mock:
      return std::make_unique<MockBackend>(MockBackend::from_jsonl(config.fixtures));
    case BackendKind::Remote:
      return std::make_unique<RemoteBackend>(config.backend_url, config.retry,
                                             config.prompts);
  }
  throw std::logic_error("unknown backend kind");
}

namespace {

Prediction failed_prediction(const std::string& qid) {
  Prediction p;
  p.qid = qid;
  p.failed = true;
  return p;
}

// `verified` holds one entry per non-failed output, in output order.
Prediction assemble(const std::string& qid, const std::vector<PathOutput>& outputs,
                    const std::vector<VerifiedPathOutput>& verified,
                    const FusionOptions& fusion) {
  Prediction p;
  p.qid = qid;
  size_t vi = 0;
  for (const auto& o : outputs) {
    PathSummary s;
    s.path = o.path;
    s.failed = o.failed;
    if (!o.failed) {
      const auto& v = verified[vi++];
      if (v.answer) s.answer = v.answer->option_index;
      s.best_span = v.best_span;
      s.confidence = v.path_confidence;
    }
    p.per_path.push_back(s);
  }
  if (verified.empty()) {
    p.failed = true;
    return p;
  }
  const auto fused = fuse(verified, fusion);
  if (fused.answer) p.answer = fused.answer->option_index;
  p.spans = fused.spans;
  return p;
}

std::vector<PathId> paths_for_task(const RunConfig& config) {
  switch (config.task) {
    case TaskKind::QAOnly: return {PathId::AnswerFirst};
    case TaskKind::MomentRetrieval: return {PathId::GroundFirst};
    case TaskKind::GroundedQA: {
      std::set<PathId> s(config.paths.begin(), config.paths.end());
      return {s.begin(), s.end()};
    }
  }
  return {};
}

}  // namespace

QuestionResult process_question(AgentBackend& backend, const DatasetRecord& record,
                                const RunConfig& config, bool record_transcript) {
  CallRecorder recorder;
  const auto deadline =
      AgentClient::Clock::now() +
      std::chrono::duration_cast<AgentClient::Clock::duration>(
          std::chrono::duration<double>(config.record_timeout_s));
  AgentClient client(backend, record_transcript ? &recorder : nullptr, deadline);
  const QuestionItem item = to_item(record);

  QuestionResult result;
  try {
    const auto outputs = run_controller(client, item, config.task, config.paths, config.path);
    std::vector<VerifiedPathOutput> verified;
    for (const auto& o : outputs) {
      if (o.failed) continue;
      verified.push_back(config.reflection ? verify_path(client, item, o, config.reflect)
                                           : without_verification(o));
    }
    result.prediction = assemble(record.qid, outputs, verified, config.fusion);
  } catch (const std::exception&) {
    result.prediction = failed_prediction(record.qid);
  }
  result.transcript = recorder.take();
  return result;
}

RunResult run_pipeline(const RunConfig& config, std::span<const DatasetRecord> dataset,
                       AgentBackend& backend, bool record_transcripts) {
  std::vector<QuestionResult> results(dataset.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < dataset.size(); i = next++) {
      results[i] = process_question(backend, dataset[i], config, record_transcripts);
    }
  };
  const size_t n_threads =
      std::min<size_t>(std::max(config.workers, 1), std::max<size_t>(dataset.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  RunResult run;
  run.predictions.reserve(results.size());
  for (auto& r : results) {
    if (r.prediction.failed) ++run.failed;
    run.predictions.push_back(std::move(r.prediction));
    for (auto& t : r.transcript) run.transcripts.push_back(std::move(t));
  }
  return run;
}

// Replay -----------------------------------------------------------------------

namespace {

struct MissingRecord : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using CallKey = std::tuple<int, int, int>;  // path, role, ordinal

class QuestionCalls {
 public:
  void add(const TranscriptRecord& r) {
    if (!calls_.emplace(CallKey{path_number(r.path), static_cast<int>(r.role), r.ordinal}, &r)
             .second) {
      throw std::invalid_argument("duplicate transcript entry");
    }
  }

  const TranscriptRecord& get(PathId path, Role role, int ordinal) const {
    auto it = calls_.find({path_number(path), static_cast<int>(role), ordinal});
    if (it == calls_.end()) {
      throw MissingRecord("missing " + std::string(to_string(role)) + " call " +
                          std::to_string(ordinal) + " on path " +
                          std::to_string(path_number(path)));
    }
    return *it->second;
  }

  bool deadline_hit() const {
    return std::any_of(calls_.begin(), calls_.end(), [](const auto& kv) {
      return kv.second->error.starts_with(kDeadlineError);
    });
  }

 private:
  std::map<CallKey, const TranscriptRecord*> calls_;
};

struct PathFailed {};

AnswerChoice replay_answer(const TranscriptRecord& r) {
  if (!r.error.empty()) throw PathFailed{};
  const int idx = wire::parse_answer_response(r.response);
  const auto options = wire::parse_options(r.request);
  return {idx, options.at(idx)};
}

std::vector<ScoredSpan> replay_ground(const TranscriptRecord& r, const RunConfig& config) {
  if (!r.error.empty()) throw PathFailed{};
  const auto raw = wire::parse_ground_response(r.response);
  return postprocess_spans(raw, wire::parse_video(r.request).duration,
                           config.path.grounding);
}

PathOutput replay_path(const QuestionCalls& calls, PathId path, const RunConfig& config) {
  PathOutput out;
  out.path = path;
  try {
    if (config.task == TaskKind::QAOnly) {
      out.answer = replay_answer(calls.get(path, Role::Answerer, 0));
    } else if (config.task == TaskKind::MomentRetrieval) {
      const auto& g = calls.get(path, Role::Grounder, 0);
      out.query_used = g.request.at("query").get<std::string>();
      out.spans = replay_ground(g, config);
    } else if (path == PathId::GroundFirst) {
      const auto& g = calls.get(path, Role::Grounder, 0);
      out.query_used = g.request.at("query").get<std::string>();
      out.spans = replay_ground(g, config);
      out.answer = replay_answer(calls.get(path, Role::Answerer, 0));
    } else if (path == PathId::AnswerFirst) {
      out.answer = replay_answer(calls.get(path, Role::Answerer, 0));
      const auto& g = calls.get(path, Role::Grounder, 0);
      out.query_used = g.request.at("query").get<std::string>();
      out.spans = replay_ground(g, config);
    } else {
      const auto& r = calls.get(path, Role::Gqa, 0);
      if (!r.error.empty()) throw PathFailed{};
      const auto resp = wire::parse_gqa_response(r.response);
      const auto options = wire::parse_options(r.request);
      out.answer = AnswerChoice{resp.option_index, options.at(resp.option_index)};
      out.query_used = build_ground_query(r.request.at("question").get<std::string>());
      out.spans = postprocess_spans(resp.spans, wire::parse_video(r.request).duration,
                                    config.path.grounding);
    }
  } catch (const PathFailed&) {
    out = PathOutput{};
    out.path = path;
    out.failed = true;
  }
  return out;
}

VerifiedPathOutput replay_verification(const QuestionCalls& calls, const PathOutput& path) {
  std::vector<double> v(path.spans.size(), 0.0);
  for (size_t k = 0; k < path.spans.size(); ++k) {
    const auto& r = calls.get(path.path, Role::Verifier, static_cast<int>(k));
    if (wire::parse_span_pair(r.request.at("span")) != path.spans[k].span) {
      throw MissingRecord("verifier call " + std::to_string(k) + " on path " +
                          std::to_string(path_number(path.path)) +
                          " does not match the replayed span");
    }
    if (!r.error.empty()) continue;
    const auto resp = wire::parse_verify_response(r.response);
    v[k] = consistency_score(resp.logit_yes, resp.logit_no);
  }
  return rescore(path, v);
}

}  // namespace

ReplayResult fuse_replay(std::span<const TranscriptRecord> transcripts,
                         const RunConfig& config) {
  std::vector<std::string> order;
  std::map<std::string, QuestionCalls> by_qid;
  ReplayResult result;
  std::set<std::string> broken;
  for (const auto& r : transcripts) {
    auto [it, inserted] = by_qid.try_emplace(r.qid);
    if (inserted) order.push_back(r.qid);
    try {
      it->second.add(r);
    } catch (const std::exception& e) {
      broken.insert(r.qid);
    }
  }

  const auto paths = paths_for_task(config);
  for (const auto& qid : order) {
    if (broken.contains(qid)) {
      result.warnings.push_back(qid + ": duplicate transcript entries; skipped");
      continue;
    }
    const auto& calls = by_qid.at(qid);
    if (calls.deadline_hit()) {
      result.predictions.push_back(failed_prediction(qid));
      continue;
    }
    try {
      std::vector<PathOutput> outputs;
      std::vector<VerifiedPathOutput> verified;
      for (PathId p : paths) {
        outputs.push_back(replay_path(calls, p, config));
        const auto& o = outputs.back();
        if (o.failed) continue;
        verified.push_back(config.reflection ? replay_verification(calls, o)
                                             : without_verification(o));
      }
      result.predictions.push_back(assemble(qid, outputs, verified, config.fusion));
    } catch (const std::exception& e) {
      result.warnings.push_back(qid + ": " + e.what() + "; skipped");
    }
  }
  return result;
}

// Scoring ----------------------------------------------------------------------

std::vector<SampleScore> score_predictions(std::span<const DatasetRecord> dataset,
                                           std::span<const Prediction> predictions) {
  std::map<std::string, const Prediction*> by_qid;
  for (const auto& p : predictions) {
    if (!by_qid.emplace(p.qid, &p).second) {
      throw std::invalid_argument("duplicate prediction qid '" + p.qid + "'");
    }
  }
  std::set<std::string> seen;
  std::vector<SampleScore> scores;
  scores.reserve(dataset.size());
  for (const auto& r : dataset) {
    if (!seen.insert(r.qid).second) {
      throw std::invalid_argument("duplicate dataset qid '" + r.qid + "'");
    }
    std::optional<int> answer;
    std::vector<TimeSpan> spans;
    if (auto it = by_qid.find(r.qid); it != by_qid.end()) {
      answer = it->second->answer;
      for (const auto& s : it->second->spans) spans.push_back(s.span);
    }
    scores.push_back(score_sample(r.qid, answer, spans, r.answer, r.spans));
  }
  return scores;
}

MetricReport evaluate_predictions(std::span<const DatasetRecord> dataset,
                                  std::span<const Prediction> predictions,
                                  const std::optional<Thresholds>& thresholds) {
  const auto scores = score_predictions(dataset, predictions);
  const bool has_qa = std::any_of(dataset.begin(), dataset.end(),
                                  [](const DatasetRecord& r) { return r.answer.has_value(); });
  if (has_qa) return aggregate(scores, thresholds.value_or(Thresholds{}));
  return evaluate_mr(scores, thresholds.value_or(Thresholds::moment_retrieval()).iou);
}

// Simulation -------------------------------------------------------------------

std::vector<AblationCell> ablation_cells() {
  using P = PathId;
  return {
      {"path-1 (G->A) w/o reflection", {P::GroundFirst}, false},
      {"path-1 (G->A) w/ reflection", {P::GroundFirst}, true},
      {"path-2 (A->G) w/o reflection", {P::AnswerFirst}, false},
      {"path-2 (A->G) w/ reflection", {P::AnswerFirst}, true},
      {"path-3 (GQA) w/o reflection", {P::Joint}, false},
      {"path-3 (GQA) w/ reflection", {P::Joint}, true},
      {"multi-path w/ reflection", {P::GroundFirst, P::AnswerFirst, P::Joint}, true},
  };
}

std::vector<DatasetRecord> make_synthetic_dataset(int n_questions, std::uint64_t seed) {
  static constexpr std::array<const char*, 8> kSubjects = {
      "the boy", "the girl", "the man", "the woman", "the dog", "the baby", "the cat",
      "the old man"};
  static constexpr std::array<const char*, 8> kActions = {
      "pick up the ball", "open the door", "look at the camera", "run to the tree",
      "sit on the sofa", "wave his hand", "jump into the pool", "push the cart"};
  static constexpr std::array<const char*, 4> kForms = {"why did {s} {a}?",
                                                        "how did {s} {a}?",
                                                        "what did {s} do after they {a}?",
                                                        "where did {s} {a}?"};
  static constexpr std::array<const char*, 12> kOptions = {
      "to play with it", "because it was raining", "to get attention", "with both hands",
      "near the window", "to throw it away", "because he was tired", "in the garden",
      "to greet a friend", "slowly", "to clean it", "on the table"};

  std::mt19937_64 rng(seed ^ 0x5eedda7a5e7ULL);
  auto pick = [&](size_t n) { return std::uniform_int_distribution<size_t>(0, n - 1)(rng); };
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto round2 = [](double x) { return std::round(x * 100.0) / 100.0; };

  std::vector<DatasetRecord> out;
  out.reserve(n_questions);
  for (int i = 0; i < n_questions; ++i) {
    DatasetRecord r;
    char qid[32];
    std::snprintf(qid, sizeof qid, "syn-%05d", i);
    r.qid = qid;
    r.video = "video-" + std::to_string(i);
    r.duration = round2(uniform(30.0, 180.0));
    const double len = round2(uniform(0.10, 0.35) * r.duration);
    const double start = round2(uniform(0.0, r.duration - len));
    r.spans = {{start, std::min(start + len, r.duration)}};

    std::string q = kForms[pick(kForms.size())];
    q.replace(q.find("{s}"), 3, kSubjects[pick(kSubjects.size())]);
    q.replace(q.find("{a}"), 3, kActions[pick(kActions.size())]);
    r.question = q;

    std::vector<size_t> idx(kOptions.size());
    for (size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t k = 0; k < 5; ++k) r.options.push_back(kOptions[idx[k]]);
    r.answer = static_cast<int>(pick(5));
    out.push_back(std::move(r));
  }
  return out;
}

SimulationResult simulate(int n_questions, std::span<const std::uint64_t> seeds,
                          const NoiseModel& noise, RunConfig base) {
  noise.validate();
  if (n_questions < 1) throw std::invalid_argument("simulate: need at least one question");
  SimulationResult sim;
  sim.n_questions = n_questions;
  sim.noise = noise;
  sim.seeds.assign(seeds.begin(), seeds.end());
  sim.cells = ablation_cells();
  sim.reports.assign(sim.cells.size(), {});

  base.backend = BackendKind::Synthetic;
  base.task = TaskKind::GroundedQA;
  base.noise = noise;
  for (std::uint64_t seed : sim.seeds) {
    const auto dataset = make_synthetic_dataset(n_questions, seed);
    SyntheticBackend backend(synthetic_truth(dataset), noise, seed);
    for (size_t c = 0; c < sim.cells.size(); ++c) {
      RunConfig config = base;
      config.seed = seed;
      config.fusion.kmeans.seed = seed;
      config.paths = sim.cells[c].paths;
      config.reflection = sim.cells[c].reflection;
      const auto run = run_pipeline(config, dataset, backend, false);
      sim.reports[c].push_back(evaluate_predictions(dataset, run.predictions));
    }
  }
  return sim;
}

namespace {

struct CellMeans {
  double r_iou = 0, m_iou = 0, r_iop = 0, m_iop = 0, acc_qa = 0, acc_gqa = 0;
};

CellMeans cell_means(const std::vector<MetricReport>& reports) {
  CellMeans m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.r_iou += r.r_iou.count(0.5) ? r.r_iou.at(0.5) : 0.0;
    m.m_iou += r.m_iou;
    m.r_iop += r.r_iop.count(0.5) ? r.r_iop.at(0.5) : 0.0;
    m.m_iop += r.m_iop.value_or(0.0);
    m.acc_qa += r.acc_qa.value_or(0.0);
    m.acc_gqa += r.acc_gqa.value_or(0.0);
  }
  const double n = static_cast<double>(reports.size());
  return {m.r_iou / n, m.m_iou / n, m.r_iop / n, m.m_iop / n, m.acc_qa / n, m.acc_gqa / n};
}

}  // namespace

nlohmann::json to_json(const SimulationResult& sim) {
  using nlohmann::json;
  json cells = json::array();
  for (size_t c = 0; c < sim.cells.size(); ++c) {
    json per_seed = json::array();
    for (const auto& r : sim.reports[c]) per_seed.push_back(to_json(r));
    json paths = json::array();
    for (PathId p : sim.cells[c].paths) paths.push_back(path_number(p));
    const auto m = cell_means(sim.reports[c]);
    cells.push_back({{"label", sim.cells[c].label},
                     {"paths", paths},
                     {"reflection", sim.cells[c].reflection},
                     {"mean",
                      {{"r_iou_0.5", m.r_iou},
                       {"m_iou", m.m_iou},
                       {"r_iop_0.5", m.r_iop},
                       {"m_iop", m.m_iop},
                       {"acc_qa", m.acc_qa},
                       {"acc_gqa", m.acc_gqa}}},
                     {"per_seed", per_seed}});
  }
  return json{{"n_questions", sim.n_questions},
              {"seeds", sim.seeds},
              {"noise",
               {{"span_jitter", sim.noise.span_jitter},
                {"conf_noise", sim.noise.conf_noise},
                {"answer_acc", sim.noise.answer_accuracy},
                {"raw_candidates", sim.noise.raw_candidates},
                {"misled_jitter_scale", sim.noise.misled_jitter_scale}}},
              {"cells", cells}};
}

std::string format_ablation_table(const SimulationResult& sim) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-30s %9s %7s %9s %7s %7s %8s\n", "cell", "IoU@0.5", "mIoU",
                "IoP@0.5", "mIoP", "Acc@QA", "Acc@GQA");
  out << buf;
  for (size_t c = 0; c < sim.cells.size(); ++c) {
    const auto m = cell_means(sim.reports[c]);
    std::snprintf(buf, sizeof buf, "%-30s %9.1f %7.1f %9.1f %7.1f %7.1f %8.1f\n",
                  sim.cells[c].label.c_str(), m.r_iou, m.m_iou, m.r_iop, m.m_iop, m.acc_qa,
                  m.acc_gqa);
    out << buf;
  }
  return out.str();
}

}  // namespace gvqa
