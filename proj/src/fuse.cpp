#include "gvqa/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

namespace gvqa {

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double ds = a[0] - b[0];
  const double de = a[1] - b[1];
  return ds * ds + de * de;
}

int nearest(const Point2& x, std::span<const Point2> centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < centers.size(); ++j) {
    const double d = sq_dist(x, centers[j]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

struct Candidate {
  Point2 x;
  double w;  // largest weight among duplicates
};

// Distinct seed candidates, ordered heaviest first, ties by earlier start then
// earlier end.
std::vector<Candidate> seed_candidates(std::span<const SpanPoint> points) {
  const bool any_positive = std::any_of(points.begin(), points.end(),
                                        [](const SpanPoint& p) { return p.w > 0.0; });
  std::map<Point2, double> distinct;
  for (const auto& p : points) {
    if (any_positive && !(p.w > 0.0)) continue;
    auto [it, inserted] = distinct.emplace(p.x, p.w);
    if (!inserted) it->second = std::max(it->second, p.w);
  }
  std::vector<Candidate> out;
  out.reserve(distinct.size());
  for (const auto& [x, w] : distinct) out.push_back({x, w});
  std::stable_sort(out.begin(), out.end(),
                   [](const Candidate& a, const Candidate& b) { return a.w > b.w; });
  return out;
}

std::vector<Point2> init_farthest_first(const std::vector<Candidate>& cands, int k) {
  std::vector<Point2> centers{cands.front().x};
  std::vector<double> dist(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) dist[i] = sq_dist(cands[i].x, centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    // Candidates are weight-ordered, so strict '>' breaks ties by weight.
    size_t pick = 0;
    for (size_t i = 1; i < cands.size(); ++i) {
      if (dist[i] > dist[pick]) pick = i;
    }
    centers.push_back(cands[pick].x);
    for (size_t i = 0; i < cands.size(); ++i) {
      dist[i] = std::min(dist[i], sq_dist(cands[i].x, cands[pick].x));
    }
  }
  return centers;
}

std::vector<Point2> init_plus_plus(const std::vector<Candidate>& cands, int k,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto draw = [&](const std::vector<double>& mass) {
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0)) {
      for (size_t i = 0; i < mass.size(); ++i) {
        if (mass[i] >= 0.0) return i;
      }
      return size_t{0};
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double r = u(rng);
    for (size_t i = 0; i < mass.size(); ++i) {
      r -= mass[i];
      if (r < 0.0) return i;
    }
    return mass.size() - 1;
  };

  std::vector<double> mass(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) mass[i] = std::max(cands[i].w, 0.0);
  std::vector<bool> used(cands.size(), false);
  std::vector<Point2> centers;
  size_t first = draw(mass);
  centers.push_back(cands[first].x);
  used[first] = true;
  while (static_cast<int>(centers.size()) < k) {
    for (size_t i = 0; i < cands.size(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) d = std::min(d, sq_dist(cands[i].x, c));
      // Candidates are distinct, so unused ones keep a positive distance; the
      // epsilon keeps zero-weight candidates selectable.
      mass[i] = used[i] ? -1.0 : (std::max(cands[i].w, 0.0) + 1e-300) * d;
    }
    std::vector<double> positive(mass.size());
    for (size_t i = 0; i < mass.size(); ++i) positive[i] = std::max(mass[i], 0.0);
    size_t pick = draw(positive);
    if (used[pick]) {
      pick = static_cast<size_t>(std::find(used.begin(), used.end(), false) - used.begin());
    }
    used[pick] = true;
    centers.push_back(cands[pick].x);
  }
  return centers;
}

}  // namespace

std::string_view to_string(VotingMode mode) {
  return mode == VotingMode::SpanLevel ? "span_level" : "path_level";
}

VotingMode voting_from_string(std::string_view name) {
  if (name == "span_level") return VotingMode::SpanLevel;
  if (name == "path_level") return VotingMode::PathLevel;
  throw std::invalid_argument("unknown voting mode '" + std::string(name) +
                              "' (expected span_level or path_level)");
}

std::string_view to_string(KMeansInit init) {
  switch (init) {
    case KMeansInit::FarthestFirst: return "farthest_first";
    case KMeansInit::LargestWeight: return "largest_weight";
    case KMeansInit::PlusPlus: return "plus_plus";
  }
  return "unknown";
}

KMeansInit kmeans_init_from_string(std::string_view name) {
  if (name == "farthest_first") return KMeansInit::FarthestFirst;
  if (name == "largest_weight") return KMeansInit::LargestWeight;
  if (name == "plus_plus") return KMeansInit::PlusPlus;
  throw std::invalid_argument("unknown k-means init '" + std::string(name) + "'");
}

std::optional<AnswerChoice> consolidate_answer(std::span<const VerifiedPathOutput> paths,
                                               VotingMode mode) {
  std::map<int, double> weight;
  std::map<int, int> votes;
  std::map<int, std::string> text;
  for (const auto& path : paths) {
    if (!path.answer) continue;
    const int a = path.answer->option_index;
    double w = 0.0;
    if (mode == VotingMode::SpanLevel) {
      for (const auto& s : path.verified) w += s.p;
    } else {
      w = path.path_confidence;
    }
    weight[a] += w;
    votes[a] += 1;
    text.emplace(a, path.answer->option_text);
  }
  if (votes.empty()) return std::nullopt;

  const bool all_zero = std::all_of(weight.begin(), weight.end(),
                                    [](const auto& kv) { return !(kv.second > 0.0); });
  // Maps iterate in ascending option order, so strict '>' keeps the lowest
  // index on ties.
  int best = votes.begin()->first;
  if (all_zero) {
    for (const auto& [a, n] : votes) {
      if (n > votes[best]) best = a;
    }
  } else {
    for (const auto& [a, w] : weight) {
      if (w > weight[best]) best = a;
    }
  }
  return AnswerChoice{best, text[best]};
}

std::vector<SpanPoint> normalize_weights(std::span<const VerifiedPathOutput> paths) {
  std::vector<SpanPoint> points;
  std::vector<double> scores;
  for (const auto& path : paths) {
    for (size_t k = 0; k < path.verified.size(); ++k) {
      const auto& s = path.verified[k];
      points.push_back({{s.span.start, s.span.end}, s.p, path.path, static_cast<int>(k)});
      scores.push_back(s.p);
    }
  }
  // Summed in sorted order so the total does not depend on path order.
  std::sort(scores.begin(), scores.end());
  double total = 0.0;
  for (double p : scores) total += p;
  for (auto& p : points) {
    p.w = total > 0.0 ? p.w / total : 1.0 / static_cast<double>(points.size());
  }
  return points;
}

double clustering_objective(std::span<const SpanPoint> points,
                            std::span<const Point2> centers,
                            std::span<const int> assignment) {
  double j = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    j += points[i].w * sq_dist(points[i].x, centers[assignment[i]]);
  }
  return j;
}

KMeansResult weighted_kmeans(std::span<const SpanPoint> points, int k,
                             const KMeansOptions& options) {
  if (k < 1) throw std::invalid_argument("weighted_kmeans: K must be >= 1");
  KMeansResult result;
  if (points.empty()) return result;

  const auto cands = seed_candidates(points);
  const int k_eff = std::min<int>(k, static_cast<int>(cands.size()));

  switch (options.init) {
    case KMeansInit::FarthestFirst:
      result.centers = init_farthest_first(cands, k_eff);
      break;
    case KMeansInit::LargestWeight:
      for (int j = 0; j < k_eff; ++j) result.centers.push_back(cands[j].x);
      break;
    case KMeansInit::PlusPlus:
      result.centers = init_plus_plus(cands, k_eff, options.seed);
      break;
  }

  auto& centers = result.centers;
  auto& assign = result.assignment;
  assign.assign(points.size(), 0);
  auto assign_all = [&] {
    for (size_t i = 0; i < points.size(); ++i) assign[i] = nearest(points[i].x, centers);
    result.objective_trace.push_back(clustering_objective(points, centers, assign));
  };

  for (int iter = 0; iter < options.max_iters; ++iter) {
    assign_all();

    // Offsets from the first member of each cluster, so a cluster of
    // identical points maps back to exactly that point.
    std::vector<int> anchor(centers.size(), -1);
    std::vector<Point2> sum(centers.size(), Point2{0.0, 0.0});
    std::vector<double> mass(centers.size(), 0.0);
    for (size_t i = 0; i < points.size(); ++i) {
      const int c = assign[i];
      if (anchor[c] < 0) anchor[c] = static_cast<int>(i);
      const auto& a = points[anchor[c]].x;
      sum[c][0] += points[i].w * (points[i].x[0] - a[0]);
      sum[c][1] += points[i].w * (points[i].x[1] - a[1]);
      mass[c] += points[i].w;
    }
    double moved = 0.0;
    for (size_t j = 0; j < centers.size(); ++j) {
      if (!(mass[j] > 0.0)) continue;
      const auto& a = points[anchor[j]].x;
      const Point2 next{a[0] + sum[j][0] / mass[j], a[1] + sum[j][1] / mass[j]};
      moved = std::max(moved, std::sqrt(sq_dist(next, centers[j])));
      centers[j] = next;
    }
    result.objective_trace.push_back(clustering_objective(points, centers, assign));
    result.iterations = iter + 1;
    if (moved < options.eps) {
      result.converged = true;
      break;
    }
  }
  assign_all();
  return result;
}

TimeSpan refine_boundaries(const Cluster& cluster, std::span<const SpanPoint> points) {
  if (cluster.members.empty()) throw DomainError("refine_boundaries: empty cluster");
  const auto& a = points[cluster.members.front()].x;
  double mass = 0.0;
  double s = 0.0;
  double e = 0.0;
  for (size_t i : cluster.members) {
    const auto& p = points[i];
    mass += p.w;
    s += p.w * (p.x[0] - a[0]);
    e += p.w * (p.x[1] - a[1]);
  }
  if (!(mass > 0.0)) throw DomainError("refine_boundaries: cluster has no weight");
  const TimeSpan out{a[0] + s / mass, a[1] + e / mass};
  if (out.start > out.end) {
    throw DomainError("refine_boundaries: refined start exceeds refined end");
  }
  return out;
}

FusionResult fuse(std::span<const VerifiedPathOutput> paths,
                  const FusionOptions& options) {
  FusionResult result;
  result.answer = consolidate_answer(paths, options.voting);

  auto points = normalize_weights(paths);
  if (points.empty()) return result;
  // Canonical order makes the floating-point sums independent of path order.
  std::stable_sort(points.begin(), points.end(), [](const SpanPoint& a, const SpanPoint& b) {
    return std::tie(a.x[0], a.x[1], a.w) < std::tie(b.x[0], b.x[1], b.w);
  });

  const auto km = weighted_kmeans(points, options.k, options.kmeans);

  std::vector<Cluster> clusters(km.centers.size());
  for (size_t j = 0; j < clusters.size(); ++j) clusters[j].center = km.centers[j];
  for (size_t i = 0; i < points.size(); ++i) {
    auto& c = clusters[km.assignment[i]];
    c.members.push_back(i);
    c.total_weight += points[i].w;
  }

  for (auto& c : clusters) {
    if (c.members.empty() || !(c.total_weight > 0.0)) continue;
    result.spans.push_back({refine_boundaries(c, points), c.total_weight});
  }
  std::stable_sort(result.spans.begin(), result.spans.end(),
                   [](const FusedSpan& a, const FusedSpan& b) {
                     if (a.weight != b.weight) return a.weight > b.weight;
                     if (a.span.start != b.span.start) return a.span.start < b.span.start;
                     return a.span.end < b.span.end;
                   });
  result.k_effective = static_cast<int>(result.spans.size());
  if (options.report_k > 0 && result.spans.size() > static_cast<size_t>(options.report_k)) {
    result.spans.resize(options.report_k);
  }
  return result;
}

}  // namespace gvqa
