#include <doctest.h>

#include <random>

#include "../oracles.hpp"
#include "gvqa/fuse.hpp"

using namespace gvqa;

namespace {

VerifiedPathOutput vpath(PathId id, int answer, std::vector<std::pair<TimeSpan, double>> spans) {
  VerifiedPathOutput v;
  v.path = id;
  v.answer = AnswerChoice{answer, std::string(1, static_cast<char>('a' + answer))};
  for (auto& [s, p] : spans) v.verified.push_back({s, p, 1.0, p});
  if (!v.verified.empty()) {
    v.best_span = v.verified.front().span;
    v.path_confidence = v.verified.front().p;
  }
  return v;
}

std::vector<SpanPoint> pts(std::initializer_list<std::tuple<double, double, double>> xs) {
  std::vector<SpanPoint> out;
  for (auto [s, e, w] : xs) out.push_back({{s, e}, w});
  return out;
}

}  // namespace

TEST_CASE("weighted answer vote") {
  const std::vector<VerifiedPathOutput> paths{
      vpath(PathId::GroundFirst, 0, {{{0, 1}, 0.5}}),
      vpath(PathId::AnswerFirst, 1, {{{0, 1}, 0.9}}),
      vpath(PathId::Joint, 0, {{{0, 1}, 0.6}}),
  };
  CHECK(consolidate_answer(paths, VotingMode::SpanLevel)->option_index == 0);

  const std::vector<VerifiedPathOutput> one{vpath(PathId::Joint, 3, {{{0, 1}, 0.1}})};
  CHECK(consolidate_answer(one, VotingMode::SpanLevel)->option_index == 3);

  const std::vector<VerifiedPathOutput> tie{vpath(PathId::GroundFirst, 2, {{{0, 1}, 0.5}}),
                                            vpath(PathId::AnswerFirst, 1, {{{0, 1}, 0.5}})};
  CHECK(consolidate_answer(tie, VotingMode::SpanLevel)->option_index == 1);

  // Span level sums every span of a path; path level uses the best one.
  const std::vector<VerifiedPathOutput> modes{
      vpath(PathId::GroundFirst, 0, {{{0, 1}, 0.5}, {{2, 3}, 0.4}}),
      vpath(PathId::AnswerFirst, 1, {{{0, 1}, 0.6}}),
  };
  CHECK(consolidate_answer(modes, VotingMode::SpanLevel)->option_index == 0);
  CHECK(consolidate_answer(modes, VotingMode::PathLevel)->option_index == 1);

  // All weights zero: plain majority.
  const std::vector<VerifiedPathOutput> zero{vpath(PathId::GroundFirst, 2, {}),
                                             vpath(PathId::AnswerFirst, 1, {}),
                                             vpath(PathId::Joint, 2, {})};
  CHECK(consolidate_answer(zero, VotingMode::SpanLevel)->option_index == 2);

  VerifiedPathOutput silent;
  const std::vector<VerifiedPathOutput> none{silent};
  CHECK_FALSE(consolidate_answer(none, VotingMode::SpanLevel));

  CHECK(voting_from_string("path_level") == VotingMode::PathLevel);
  CHECK(to_string(VotingMode::SpanLevel) == "span_level");
  CHECK_THROWS_AS(voting_from_string("majority"), std::invalid_argument);
}

TEST_CASE("weight normalisation") {
  auto weights = [](std::vector<VerifiedPathOutput> paths) {
    std::vector<double> w;
    for (const auto& p : normalize_weights(paths)) w.push_back(p.w);
    return w;
  };
  auto w1 = weights({vpath(PathId::GroundFirst, 0, {{{0, 1}, 0.2}, {{1, 2}, 0.2}}),
                     vpath(PathId::Joint, 0, {{{0, 1}, 0.6}})});
  REQUIRE(w1.size() == 3);
  CHECK(w1[0] == doctest::Approx(0.2));
  CHECK(w1[1] == doctest::Approx(0.2));
  CHECK(w1[2] == doctest::Approx(0.6));

  auto w2 = weights({vpath(PathId::GroundFirst, 0, {{{0, 1}, 1.0}}),
                     vpath(PathId::Joint, 0, {{{0, 1}, 1.0}})});
  CHECK(w2 == std::vector<double>{0.5, 0.5});

  auto w3 = weights({vpath(PathId::GroundFirst, 0, {{{0, 1}, 0}, {{1, 2}, 0}}),
                     vpath(PathId::Joint, 0, {{{0, 1}, 0}, {{3, 4}, 0}})});
  CHECK(w3 == std::vector<double>{0.25, 0.25, 0.25, 0.25});

  const auto sp = normalize_weights(std::vector<VerifiedPathOutput>{
      vpath(PathId::Joint, 0, {{{0, 1}, 0.3}, {{4, 7}, 0.1}})});
  CHECK(sp[1].path == PathId::Joint);
  CHECK(sp[1].rank == 1);
  CHECK(sp[1].x == Point2{4, 7});
}

TEST_CASE("weighted k-means examples") {
  const auto same = pts({{3, 7, 0.5}, {3, 7, 0.5}});
  const auto r1 = weighted_kmeans(same, 1);
  REQUIRE(r1.centers.size() == 1);
  CHECK(r1.centers[0] == Point2{3, 7});

  const auto three = pts({{0, 10, 0.4}, {0.4, 9.6, 0.4}, {50, 60, 0.2}});
  const auto r2 = weighted_kmeans(three, 2);
  REQUIRE(r2.centers.size() == 2);
  CHECK(r2.assignment[0] == r2.assignment[1]);
  CHECK(r2.assignment[0] != r2.assignment[2]);
  const auto& c1 = r2.centers[r2.assignment[0]];
  CHECK(c1[0] == doctest::Approx(0.2));
  CHECK(c1[1] == doctest::Approx(9.8));
  // The brute-force optimum over all 2-partitions groups the first two.
  const auto best = oracle::best_partition(three, 2);
  CHECK(best.labels[0] == best.labels[1]);
  CHECK(best.labels[0] != best.labels[2]);
  CHECK(clustering_objective(three, r2.centers, r2.assignment) ==
        doctest::Approx(best.objective).epsilon(1e-12));

  CHECK(KMeansOptions{}.max_iters == 10);
  CHECK(KMeansOptions{}.eps == 1e-6);
  CHECK_THROWS_AS(weighted_kmeans(three, 0), std::invalid_argument);
  CHECK(weighted_kmeans(std::vector<SpanPoint>{}, 3).centers.empty());
}

TEST_CASE("k-means caps K by the distinct positive-weight points") {
  const auto p = pts({{0, 1, 0.5}, {0, 1, 0.3}, {5, 6, 0.2}, {9, 9.5, 0.0}});
  const auto r = weighted_kmeans(p, 5);
  CHECK(r.centers.size() == 2);
  const auto zeros = pts({{0, 1, 0}, {5, 6, 0}, {7, 8, 0}});
  CHECK(weighted_kmeans(zeros, 5).centers.size() == 3);
}

TEST_CASE("k-means initialisation strategies") {
  const auto p = pts({{0, 10, 0.3}, {0.5, 10.5, 0.3}, {40, 50, 0.2}, {80, 90, 0.2}});
  for (auto init : {KMeansInit::FarthestFirst, KMeansInit::LargestWeight, KMeansInit::PlusPlus}) {
    KMeansOptions o;
    o.init = init;
    o.seed = 4;
    const auto r = weighted_kmeans(p, 3, o);
    CHECK(r.centers.size() == 3);
    CHECK(kmeans_init_from_string(to_string(init)) == init);
    // Deterministic for a fixed seed.
    const auto again = weighted_kmeans(p, 3, o);
    CHECK(again.centers == r.centers);
  }
}

TEST_CASE("k-means fixed point and monotone objective") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 100), w(0.01, 1);
  for (int t = 0; t < 300; ++t) {
    std::vector<SpanPoint> p;
    const int n = 1 + static_cast<int>(rng() % 15);
    for (int i = 0; i < n; ++i) {
      double a = u(rng), b = u(rng);
      p.push_back({{std::min(a, b), std::max(a, b)}, w(rng)});
    }
    KMeansOptions o;
    o.max_iters = 100;
    o.eps = 0;
    const auto r = weighted_kmeans(p, 1 + static_cast<int>(rng() % 4), o);
    for (size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] + 1e-9);
    }
    if (!r.converged) continue;
    for (size_t i = 0; i < p.size(); ++i) {
      const double own = (p[i].x[0] - r.centers[r.assignment[i]][0]) * (p[i].x[0] - r.centers[r.assignment[i]][0]) +
                         (p[i].x[1] - r.centers[r.assignment[i]][1]) * (p[i].x[1] - r.centers[r.assignment[i]][1]);
      for (const auto& c : r.centers) {
        const double d = (p[i].x[0] - c[0]) * (p[i].x[0] - c[0]) + (p[i].x[1] - c[1]) * (p[i].x[1] - c[1]);
        CHECK(own <= d + 1e-9);
      }
    }
    for (size_t j = 0; j < r.centers.size(); ++j) {
      double m = 0, sx = 0, sy = 0;
      for (size_t i = 0; i < p.size(); ++i) {
        if (r.assignment[i] != static_cast<int>(j)) continue;
        m += p[i].w;
        sx += p[i].w * p[i].x[0];
        sy += p[i].w * p[i].x[1];
      }
      if (m == 0) continue;
      CHECK(std::abs(sx / m - r.centers[j][0]) < 1e-9);
      CHECK(std::abs(sy / m - r.centers[j][1]) < 1e-9);
    }
  }
}

TEST_CASE("boundary refinement") {
  const auto p = pts({{10, 20, 0.25}, {14, 22, 0.75}, {0, 10, 0.5}, {2, 12, 0.5}});
  const auto a = refine_boundaries({{}, {0, 1}, 1.0}, p);
  CHECK(a.start == doctest::Approx(13));
  CHECK(a.end == doctest::Approx(21.5));
  CHECK(refine_boundaries({{}, {1}, 0.75}, p) == TimeSpan{14, 22});
  const auto b = refine_boundaries({{}, {2, 3}, 1.0}, p);
  CHECK(b.start == doctest::Approx(1));
  CHECK(b.end == doctest::Approx(11));

  CHECK_THROWS_AS(refine_boundaries({{}, {}, 0}, p), DomainError);
  const auto zero = pts({{1, 2, 0}});
  CHECK_THROWS_AS(refine_boundaries({{}, {0}, 0}, zero), DomainError);
}

TEST_CASE("fusion") {
  SUBCASE("identical paths collapse to their span") {
    std::vector<VerifiedPathOutput> paths;
    for (PathId id : {PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint}) {
      paths.push_back(vpath(id, 2, {{{12, 18}, 0.7}}));
    }
    const auto r = fuse(paths);
    CHECK(r.answer->option_index == 2);
    REQUIRE(r.spans.size() == 1);
    CHECK(r.spans[0].span.start == doctest::Approx(12));
    CHECK(r.spans[0].span.end == doctest::Approx(18));
    CHECK(r.spans[0].weight == doctest::Approx(1.0));
    CHECK(r.k_effective == 1);
  }
  SUBCASE("one path carries all the weight") {
    const std::vector<VerifiedPathOutput> paths{
        vpath(PathId::GroundFirst, 0, {{{5, 9}, 0.8}, {{30, 40}, 0.3}}),
        vpath(PathId::AnswerFirst, 0, {{{60, 70}, 0.0}}),
        vpath(PathId::Joint, 1, {{{80, 90}, 0.0}}),
    };
    const auto r = fuse(paths);
    REQUIRE(!r.spans.empty());
    CHECK(r.spans[0].span == TimeSpan{5, 9});
    CHECK(r.k_effective == 2);
  }
  SUBCASE("K is capped by distinct points and report_k truncates") {
    const std::vector<VerifiedPathOutput> paths{
        vpath(PathId::GroundFirst, 0, {{{0, 10}, 0.5}}),
        vpath(PathId::Joint, 0, {{{0, 10}, 0.5}, {{50, 60}, 0.2}}),
    };
    const auto r = fuse(paths, {5, 3});
    CHECK(r.k_effective == 2);
    CHECK(r.spans.size() == 2);
    CHECK(r.spans[0].weight > r.spans[1].weight);

    const auto k1 = fuse(paths, {1, 3});
    CHECK(k1.spans.size() == 1);
    const auto r1 = fuse(paths, {5, 1});
    CHECK(r1.spans.size() == 1);
    CHECK(r1.k_effective == 2);
  }
  SUBCASE("no spans at all") {
    const std::vector<VerifiedPathOutput> paths{vpath(PathId::AnswerFirst, 1, {})};
    const auto r = fuse(paths);
    CHECK(r.answer->option_index == 1);
    CHECK(r.spans.empty());
  }
}

TEST_CASE("fusion does not depend on path order") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 100), p(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<VerifiedPathOutput> paths;
    for (PathId id : {PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint}) {
      std::vector<std::pair<TimeSpan, double>> spans;
      for (int k = 0; k < 5; ++k) {
        double a = u(rng), b = u(rng);
        spans.push_back({{std::min(a, b), std::max(a, b)}, p(rng)});
      }
      paths.push_back(vpath(id, static_cast<int>(rng() % 4), spans));
    }
    const auto a = fuse(paths);
    std::reverse(paths.begin(), paths.end());
    const auto b = fuse(paths);
    CHECK(a.answer == b.answer);
    REQUIRE(a.spans.size() == b.spans.size());
    for (size_t i = 0; i < a.spans.size(); ++i) {
      CHECK(a.spans[i].span == b.spans[i].span);
      CHECK(a.spans[i].weight == b.spans[i].weight);
    }
  }
}
