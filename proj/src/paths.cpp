#include "gvqa/paths.hpp"

#include <algorithm>
#include <set>

namespace gvqa {

std::string_view to_string(TaskKind task) {
  switch (task) {
    case TaskKind::GroundedQA: return "gqa";
    case TaskKind::QAOnly: return "qa";
    case TaskKind::MomentRetrieval: return "mr";
  }
  return "unknown";
}

TaskKind task_from_string(std::string_view name) {
  if (name == "gqa") return TaskKind::GroundedQA;
  if (name == "qa") return TaskKind::QAOnly;
  if (name == "mr") return TaskKind::MomentRetrieval;
  throw std::invalid_argument("unknown task '" + std::string(name) +
                              "' (expected gqa, qa or mr)");
}

std::optional<TimeSpan> answer_clip(std::span<const ScoredSpan> spans, int clip_k) {
  if (spans.empty() || clip_k < 1) return std::nullopt;
  const auto n = std::min<size_t>(spans.size(), clip_k);
  TimeSpan hull = spans[0].span;
  for (size_t i = 1; i < n; ++i) {
    hull.start = std::min(hull.start, spans[i].span.start);
    hull.end = std::max(hull.end, spans[i].span.end);
  }
  return hull;
}

PathOutput run_path1(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings) {
  PathOutput out;
  out.path = PathId::GroundFirst;
  out.query_used = build_ground_query(item.question);
  out.spans = ground(agents,
                     {{item.qid, out.path, 0}, item.video, out.query_used,
                      settings.limits.grounder},
                     settings.grounding);
  out.answer = agents.answer({{item.qid, out.path, 0},
                              item.video,
                              item.question,
                              item.options,
                              answer_clip(out.spans, settings.clip_k),
                              settings.limits.answerer});
  return out;
}

PathOutput run_path2(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings) {
  PathOutput out;
  out.path = PathId::AnswerFirst;
  out.answer = agents.answer({{item.qid, out.path, 0},
                              item.video,
                              item.question,
                              item.options,
                              std::nullopt,
                              settings.limits.answerer});
  out.query_used = build_answer_augmented_query(item.question, *out.answer);
  out.spans = ground(agents,
                     {{item.qid, out.path, 0}, item.video, out.query_used,
                      settings.limits.grounder},
                     settings.grounding);
  return out;
}

PathOutput run_path3(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings) {
  PathOutput out;
  out.path = PathId::Joint;
  out.query_used = build_ground_query(item.question);
  auto resp = agents.gqa({{item.qid, out.path, 0},
                          item.video,
                          item.question,
                          item.options,
                          settings.limits.gqa});
  out.answer = AnswerChoice{resp.option_index, item.options.at(resp.option_index)};
  out.spans = postprocess_spans(resp.spans, item.video.duration, settings.grounding);
  return out;
}

namespace {

template <typename Fn>
PathOutput guarded(PathId path, Fn&& fn) {
  try {
    return fn();
  } catch (const DeadlineExceeded&) {
    throw;
  } catch (const std::exception& e) {
    PathOutput failed;
    failed.path = path;
    failed.failed = true;
    failed.error = e.what();
    return failed;
  }
}

}  // namespace

std::vector<PathOutput> run_controller(AgentClient& agents, const QuestionItem& item,
                                       TaskKind task,
                                       std::span<const PathId> enabled_paths,
                                       const PathSettings& settings) {
  if (enabled_paths.empty()) {
    throw std::invalid_argument("run_controller: no reasoning path enabled");
  }
  std::vector<PathOutput> outputs;

  switch (task) {
    case TaskKind::QAOnly:
      outputs.push_back(guarded(PathId::AnswerFirst, [&] {
        PathOutput out;
        out.path = PathId::AnswerFirst;
        out.answer = agents.answer({{item.qid, out.path, 0},
                                    item.video,
                                    item.question,
                                    item.options,
                                    std::nullopt,
                                    settings.limits.answerer});
        return out;
      }));
      break;

    case TaskKind::MomentRetrieval:
      outputs.push_back(guarded(PathId::GroundFirst, [&] {
        PathOutput out;
        out.path = PathId::GroundFirst;
        out.query_used = item.question;
        out.spans = ground(agents,
                           {{item.qid, out.path, 0}, item.video, out.query_used,
                            settings.limits.grounder},
                           settings.grounding);
        return out;
      }));
      break;

    case TaskKind::GroundedQA: {
      const std::set<PathId> paths(enabled_paths.begin(), enabled_paths.end());
      for (PathId p : paths) {
        outputs.push_back(guarded(p, [&] {
          switch (p) {
            case PathId::GroundFirst: return run_path1(agents, item, settings);
            case PathId::AnswerFirst: return run_path2(agents, item, settings);
            case PathId::Joint: return run_path3(agents, item, settings);
          }
          throw std::logic_error("unreachable path id");
        }));
      }
      break;
    }
  }
  return outputs;
}

}  // namespace gvqa
