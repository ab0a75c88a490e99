#pragma once

// Multi-path fusion: a weighted vote picks the consensus answer, span scores
// are normalised into expert weights, spans are clustered as (start, end)
// points by weighted k-means, and each cluster's boundary is refined to the
// weighted mean of its members.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gvqa/reflect.hpp"

namespace gvqa {

enum class VotingMode {
  SpanLevel,  // sum_i sum_k p_ik over agreeing paths
  PathLevel,  // sum_i p_i over agreeing paths
};

std::string_view to_string(VotingMode mode);
VotingMode voting_from_string(std::string_view name);  // span_level | path_level

enum class KMeansInit {
  FarthestFirst,  // heaviest point, then repeatedly the farthest point
  LargestWeight,  // the K heaviest distinct points
  PlusPlus,       // seeded k-means++ (D^2 * w sampling)
};

std::string_view to_string(KMeansInit init);
KMeansInit kmeans_init_from_string(std::string_view name);

using Point2 = std::array<double, 2>;

struct SpanPoint {
  Point2 x{};  // (start, end)
  double w = 0.0;
  PathId path = PathId::GroundFirst;
  int rank = 0;
};

struct KMeansOptions {
  int max_iters = 10;
  double eps = 1e-6;
  KMeansInit init = KMeansInit::FarthestFirst;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<Point2> centers;
  std::vector<int> assignment;  // per point, index into centers
  int iterations = 0;
  bool converged = false;
  /// Objective after every assignment step and every centre update, in order.
  std::vector<double> objective_trace;
};

struct Cluster {
  Point2 center{};
  std::vector<size_t> members;
  double total_weight = 0.0;
};

struct FusedSpan {
  TimeSpan span;
  double weight = 0.0;
};

struct FusionResult {
  std::optional<AnswerChoice> answer;
  std::vector<FusedSpan> spans;  // weight descending
  int k_effective = 0;
};

struct FusionOptions {
  int k = 5;
  int report_k = 3;  // <= 0 keeps every cluster
  VotingMode voting = VotingMode::SpanLevel;
  KMeansOptions kmeans;
};

inline constexpr int kDefaultTopN = 5;

/// Weighted majority vote. Ties go to the lowest option index; when every
/// weight is zero the vote is unweighted. Empty when no path has an answer.
std::optional<AnswerChoice> consolidate_answer(std::span<const VerifiedPathOutput> paths,
                                               VotingMode mode);

/// w_ik = p_ik / sum p, or uniform weights when every p is zero.
std::vector<SpanPoint> normalize_weights(std::span<const VerifiedPathOutput> paths);

/// sum_i w_i * |x_i - C_assign(i)|^2
double clustering_objective(std::span<const SpanPoint> points,
                            std::span<const Point2> centers,
                            std::span<const int> assignment);

/// Lloyd iterations with weighted means. The effective K is capped by the
/// number of distinct positive-weight points (all points if none is positive).
/// Equidistant points go to the lowest cluster index; a cluster without
/// weight keeps its previous centre. Stops after max_iters updates or when no
/// centre moves by eps or more.
KMeansResult weighted_kmeans(std::span<const SpanPoint> points, int k,
                             const KMeansOptions& options = {});

/// Weighted mean of the members. Throws DomainError for a cluster without
/// weight or when the mean is not a valid span.
TimeSpan refine_boundaries(const Cluster& cluster, std::span<const SpanPoint> points);

/// Full fusion over the surviving (non-failed) verified paths.
FusionResult fuse(std::span<const VerifiedPathOutput> paths,
                  const FusionOptions& options = {});

}  // namespace gvqa
