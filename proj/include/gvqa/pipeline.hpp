#pragma once

// End-to-end driver: controller -> reflection -> fusion per question over a
// bounded worker pool, transcript replay, dataset scoring and the synthetic
// ablation study.

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gvqa/config.hpp"
#include "gvqa/eval.hpp"
#include "gvqa/records.hpp"

namespace gvqa {

QuestionItem to_item(const DatasetRecord& record);

/// Ground truth for the synthetic backend; records without an answer or a
/// span are skipped.
std::map<std::string, SyntheticTruth> synthetic_truth(std::span<const DatasetRecord> dataset);

/// Builds the backend named by `config`. The synthetic backend takes its
/// ground truth from `dataset`.
std::unique_ptr<AgentBackend> make_backend(const RunConfig& config,
                                           std::span<const DatasetRecord> dataset);

struct QuestionResult {
  Prediction prediction;
  std::vector<TranscriptRecord> transcript;
};

/// Never throws for agent failures; they surface as failed paths or a failed
/// prediction.
QuestionResult process_question(AgentBackend& backend, const DatasetRecord& record,
                                const RunConfig& config, bool record_transcript = true);

struct RunResult {
  std::vector<Prediction> predictions;      // dataset order
  std::vector<TranscriptRecord> transcripts;  // dataset order, then path/role/ordinal
  size_t failed = 0;
};

/// Output is independent of `config.workers`.
RunResult run_pipeline(const RunConfig& config, std::span<const DatasetRecord> dataset,
                       AgentBackend& backend, bool record_transcripts = true);

struct ReplayResult {
  std::vector<Prediction> predictions;
  std::vector<std::string> warnings;
};

/// Rebuilds every question's path outputs and verifier scores from recorded
/// calls and re-runs reflection scoring and fusion under `config`. Questions
/// with missing or inconsistent records are skipped with a warning.
ReplayResult fuse_replay(std::span<const TranscriptRecord> transcripts,
                         const RunConfig& config);

/// Predictions missing from `predictions` score zero. Throws on duplicate qids.
std::vector<SampleScore> score_predictions(std::span<const DatasetRecord> dataset,
                                           std::span<const Prediction> predictions);

/// Grounded-QA report, or a moment-retrieval report when no record has an
/// answer. Without explicit thresholds each task uses its own defaults.
MetricReport evaluate_predictions(std::span<const DatasetRecord> dataset,
                                  std::span<const Prediction> predictions,
                                  const std::optional<Thresholds>& thresholds = {});

// Synthetic ablation study ----------------------------------------------------

struct AblationCell {
  std::string label;
  std::vector<PathId> paths;
  bool reflection = true;
};

/// Single paths 1..3 each without and with reflection, then all paths with
/// reflection.
std::vector<AblationCell> ablation_cells();

/// Questions with five options and one ground-truth span covering 10-35% of
/// a 30-180 s video.
std::vector<DatasetRecord> make_synthetic_dataset(int n_questions, std::uint64_t seed);

struct SimulationResult {
  int n_questions = 0;
  NoiseModel noise;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;
  std::vector<std::vector<MetricReport>> reports;  // [cell][seed]
};

SimulationResult simulate(int n_questions, std::span<const std::uint64_t> seeds,
                          const NoiseModel& noise, RunConfig base = {});

nlohmann::json to_json(const SimulationResult& sim);
std::string format_ablation_table(const SimulationResult& sim);

}  // namespace gvqa
