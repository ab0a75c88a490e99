#pragma once

// JSONL record types: datasets, predictions and agent-call transcripts.

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "gvqa/agents.hpp"
#include "gvqa/fuse.hpp"

namespace gvqa {

/// {"qid", "video", "duration", "question", "options", "answer", "spans"}.
/// Moment-retrieval records may omit options and answer.
struct DatasetRecord {
  std::string qid;
  std::string video;
  double duration = 0.0;
  std::string question;
  std::vector<std::string> options;
  std::optional<int> answer;
  std::vector<TimeSpan> spans;
};

struct PathSummary {
  PathId path = PathId::GroundFirst;
  bool failed = false;
  std::optional<int> answer;
  std::optional<TimeSpan> best_span;
  double confidence = 0.0;
};

/// {"qid", "status", "answer", "spans": [[s, e, w], ...], "per_path": [...]}
struct Prediction {
  std::string qid;
  bool failed = false;
  std::optional<int> answer;
  std::vector<FusedSpan> spans;
  std::vector<PathSummary> per_path;
};

nlohmann::json to_json(const DatasetRecord& r);
/// Validates the record invariants; throws std::invalid_argument.
DatasetRecord dataset_record_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TranscriptRecord& r);
TranscriptRecord transcript_record_from_json(const nlohmann::json& j);

/// One compact JSON document per line.
std::string to_jsonl_line(const nlohmann::json& j);

/// Parses each non-blank line; errors carry "path:line".
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& docs);

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);
std::vector<TranscriptRecord> read_transcripts(const std::filesystem::path& path);

}  // namespace gvqa
