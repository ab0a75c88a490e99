#pragma once

// The three reasoning trajectories and the task controller.
//
//   Path 1 (ground first):  question -> ground query -> grounder -> answerer
//                           over the top-ranked clip
//   Path 2 (answer first):  answerer over the full video -> answer-augmented
//                           query -> grounder
//   Path 3 (joint):         one GQA call yields answer and spans together

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvqa/agents.hpp"

namespace gvqa {

enum class TaskKind { GroundedQA, QAOnly, MomentRetrieval };

std::string_view to_string(TaskKind task);
TaskKind task_from_string(std::string_view name);  // "gqa" | "qa" | "mr"

struct QuestionItem {
  std::string qid;
  VideoMeta video;
  std::string question;
  std::vector<std::string> options;
};

struct PathSettings {
  GroundSettings grounding;
  int clip_k = 1;
  RoleLimits limits;
};

struct PathOutput {
  PathId path = PathId::GroundFirst;
  std::optional<AnswerChoice> answer;
  std::vector<ScoredSpan> spans;  // confidence order, at most top_n
  std::string query_used;
  bool failed = false;
  std::string error;
};

/// Clip handed to the Path-1 answerer: the hull of the top `clip_k` spans, or
/// nothing (full video) when no span was grounded.
std::optional<TimeSpan> answer_clip(std::span<const ScoredSpan> spans, int clip_k);

// Each path throws on agent failure; run_controller turns that into a failed
// PathOutput.
PathOutput run_path1(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings);
PathOutput run_path2(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings);
PathOutput run_path3(AgentClient& agents, const QuestionItem& item,
                     const PathSettings& settings);

/// Routes the item by task kind. GroundedQA runs every enabled path; QAOnly
/// runs the answerer alone (reported as path 2); MomentRetrieval runs the
/// grounder alone on the raw query (reported as path 1). Output is ordered
/// by path id.
std::vector<PathOutput> run_controller(AgentClient& agents, const QuestionItem& item,
                                       TaskKind task,
                                       std::span<const PathId> enabled_paths,
                                       const PathSettings& settings);

}  // namespace gvqa
