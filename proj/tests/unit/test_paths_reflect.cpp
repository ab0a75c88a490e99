#include <doctest.h>

#include <random>

#include "gvqa/backends.hpp"
#include "gvqa/reflect.hpp"
#include "gvqa/wire.hpp"

using namespace gvqa;
using nlohmann::json;

namespace {

const QuestionItem kItem{"q1", {"vid", 120.0}, "why did the boy pick up the ball?",
                         {"to play", "to throw it", "to eat it", "no reason"}};

SyntheticBackend synthetic(NoiseModel noise = {}, std::uint64_t seed = 5) {
  std::map<std::string, SyntheticTruth> truth;
  truth["q1"] = {kItem.question, kItem.options, 1, {30, 50}};
  return SyntheticBackend(truth, noise, seed);
}

std::vector<TranscriptRecord> of_path(const std::vector<TranscriptRecord>& recs, PathId p) {
  std::vector<TranscriptRecord> out;
  for (const auto& r : recs) {
    if (r.path == p) out.push_back(r);
  }
  return out;
}

bool same_records(const std::vector<TranscriptRecord>& a, const std::vector<TranscriptRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].role != b[i].role || a[i].ordinal != b[i].ordinal ||
        a[i].request != b[i].request || a[i].response != b[i].response) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("zero-noise paths recover the answer and the span") {
  auto backend = synthetic();
  AgentClient client(backend);
  for (auto run : {run_path1, run_path2, run_path3}) {
    const auto out = run(client, kItem, PathSettings{});
    CHECK_FALSE(out.failed);
    REQUIRE(out.answer);
    CHECK(out.answer->option_index == 1);
    CHECK(out.answer->option_text == "to throw it");
    REQUIRE(!out.spans.empty());
    CHECK(out.spans.front().span == TimeSpan{30, 50});
  }
}

TEST_CASE("each path makes the expected calls") {
  auto backend = synthetic({0.2, 0.1, 0.5});
  CallRecorder recorder;
  AgentClient client(backend, &recorder);
  const std::vector<PathId> all{PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint};
  const auto outs = run_controller(client, kItem, TaskKind::GroundedQA, all, PathSettings{});
  REQUIRE(outs.size() == 3);
  CHECK(outs[0].path == PathId::GroundFirst);
  CHECK(outs[1].path == PathId::AnswerFirst);
  CHECK(outs[2].path == PathId::Joint);

  const auto recs = recorder.take();
  auto count = [&](PathId p, Role r) {
    return std::count_if(recs.begin(), recs.end(),
                         [&](const auto& x) { return x.path == p && x.role == r; });
  };
  CHECK(count(PathId::GroundFirst, Role::Grounder) == 1);
  CHECK(count(PathId::GroundFirst, Role::Answerer) == 1);
  CHECK(count(PathId::AnswerFirst, Role::Grounder) == 1);
  CHECK(count(PathId::AnswerFirst, Role::Answerer) == 1);
  CHECK(count(PathId::Joint, Role::Gqa) == 1);
  CHECK(recs.size() == 5);

  for (const auto& o : outs) CHECK(o.spans.size() <= 5);

  // Path 2 grounds the answer-augmented query and logs it verbatim.
  const auto p2 = of_path(recs, PathId::AnswerFirst);
  const auto g2 = std::find_if(p2.begin(), p2.end(), [](auto& r) { return r.role == Role::Grounder; });
  CHECK(g2->request["query"] == outs[1].query_used);
  CHECK(outs[1].query_used ==
        build_answer_augmented_query(kItem.question, *outs[1].answer));

  // Path 1 answers over the top grounded clip.
  const auto p1 = of_path(recs, PathId::GroundFirst);
  const auto a1 = std::find_if(p1.begin(), p1.end(), [](auto& r) { return r.role == Role::Answerer; });
  CHECK(a1->request["clip"] == wire::span_pair(outs[0].spans.front().span));
}

TEST_CASE("a wrong provisional answer enters the path 2 query") {
  auto backend = synthetic({0.1, 0.1, 0.0});
  AgentClient client(backend);
  const auto out = run_path2(client, kItem, PathSettings{});
  REQUIRE(out.answer);
  CHECK(out.answer->option_index != 1);
  CHECK(out.query_used.find(normalize_answer(out.answer->option_text)) != std::string::npos);
  CHECK_FALSE(out.spans.empty());
}

TEST_CASE("disabling a path does not change the others") {
  auto backend = synthetic({0.2, 0.1, 0.6}, 17);
  const std::vector<PathId> all{PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint};
  CallRecorder full_rec;
  AgentClient full(backend, &full_rec);
  run_controller(full, kItem, TaskKind::GroundedQA, all, PathSettings{});
  const auto full_recs = full_rec.take();

  for (PathId p : all) {
    CallRecorder rec;
    AgentClient c(backend, &rec);
    const std::vector<PathId> only{p};
    run_controller(c, kItem, TaskKind::GroundedQA, only, PathSettings{});
    CHECK(same_records(rec.take(), of_path(full_recs, p)));
  }
}

TEST_CASE("controller routing by task") {
  auto backend = synthetic();
  AgentClient client(backend);
  const std::vector<PathId> all{PathId::Joint, PathId::GroundFirst, PathId::Joint};

  const auto qa = run_controller(client, kItem, TaskKind::QAOnly, all, PathSettings{});
  REQUIRE(qa.size() == 1);
  CHECK(qa[0].spans.empty());
  CHECK(qa[0].answer->option_index == 1);

  const auto mr = run_controller(client, kItem, TaskKind::MomentRetrieval, all, PathSettings{});
  REQUIRE(mr.size() == 1);
  CHECK_FALSE(mr[0].answer);
  CHECK_FALSE(mr[0].spans.empty());
  CHECK(mr[0].query_used == kItem.question);

  const auto gqa = run_controller(client, kItem, TaskKind::GroundedQA, all, PathSettings{});
  REQUIRE(gqa.size() == 2);
  CHECK(gqa[0].path == PathId::GroundFirst);
  CHECK(gqa[1].path == PathId::Joint);

  CHECK_THROWS_AS(run_controller(client, kItem, TaskKind::GroundedQA, {}, PathSettings{}),
                  std::invalid_argument);
  CHECK(task_from_string(to_string(TaskKind::MomentRetrieval)) == TaskKind::MomentRetrieval);
  CHECK_THROWS_AS(task_from_string("vqa"), std::invalid_argument);
}

TEST_CASE("a failing path is reported without aborting the others") {
  MockBackend backend({
      {Role::Grounder, json::object(), {{"spans", json::array()}}, ""},
      {Role::Answerer, json::object(), {{"option_index", 3}}, ""},
  });
  AgentClient client(backend);
  const std::vector<PathId> all{PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint};
  const auto outs = run_controller(client, kItem, TaskKind::GroundedQA, all, PathSettings{});
  REQUIRE(outs.size() == 3);
  // No spans: path 1 answers from the full video.
  CHECK_FALSE(outs[0].failed);
  CHECK(outs[0].spans.empty());
  CHECK(outs[0].answer->option_index == 3);
  CHECK_FALSE(outs[1].failed);
  CHECK(outs[2].failed);
  CHECK(outs[2].error.find("no gqa fixture") != std::string::npos);
}

TEST_CASE("answer clip") {
  const std::vector<ScoredSpan> spans{{{10, 20}, .9}, {{5, 8}, .5}, {{30, 40}, .2}};
  CHECK(answer_clip(spans, 1) == TimeSpan{10, 20});
  CHECK(answer_clip(spans, 2) == TimeSpan{5, 20});
  CHECK(answer_clip(spans, 9) == TimeSpan{5, 40});
  CHECK_FALSE(answer_clip({}, 1));
  CHECK(PathSettings{}.clip_k == 1);
}

// Reflection ------------------------------------------------------------------

TEST_CASE("consistency score") {
  CHECK(consistency_score(0, 0) == 0.5);
  CHECK(consistency_score(2, 0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(consistency_score(-3, 1) == doctest::Approx(0.0180).epsilon(1e-3));
  CHECK(consistency_score(800, 0) == 1.0);
  CHECK(consistency_score(-800, 0) == 0.0);
}

namespace {

PathOutput two_span_path() {
  PathOutput p;
  p.path = PathId::GroundFirst;
  p.answer = AnswerChoice{2, "c"};
  p.spans = {{{0, 10}, 0.9}, {{20, 30}, 0.6}};
  p.query_used = "The moment when x";
  return p;
}

}  // namespace

TEST_CASE("product-of-experts rescoring") {
  const auto p = two_span_path();
  const std::vector<double> v{0.2, 0.9};
  const auto out = rescore(p, v);
  REQUIRE(out.verified.size() == 2);
  CHECK(out.verified[0].span == TimeSpan{20, 30});
  CHECK(out.verified[0].p == doctest::Approx(0.54));
  CHECK(out.verified[1].p == doctest::Approx(0.18));
  CHECK(out.best_span == TimeSpan{20, 30});
  CHECK(out.path_confidence == doctest::Approx(0.54));
  CHECK(out.answer == p.answer);
  CHECK(out.query_used == p.query_used);

  const std::vector<double> wrong{0.5};
  CHECK_THROWS_AS(rescore(p, wrong), std::invalid_argument);

  PathOutput empty = p;
  empty.spans.clear();
  const auto e = rescore(empty, std::vector<double>{});
  CHECK_FALSE(e.best_span);
  CHECK(e.path_confidence == 0.0);

  const auto plain = without_verification(p);
  CHECK(plain.verified[0].span == TimeSpan{0, 10});
  CHECK(plain.verified[1].span == TimeSpan{20, 30});
  CHECK(plain.verified[0].v == 1.0);
}

TEST_CASE("rescoring properties") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    PathOutput p;
    const int n = 1 + static_cast<int>(rng() % 5);
    std::vector<double> v;
    for (int i = 0; i < n; ++i) {
      p.spans.push_back({{double(i), double(i) + 1 + u(rng)}, (rng() % 4 == 0) ? 0.0 : u(rng)});
      v.push_back((rng() % 4 == 0) ? 0.0 : u(rng));
    }
    const auto out = rescore(p, v);
    std::vector<std::pair<double, double>> in_spans, out_spans;
    for (const auto& s : p.spans) in_spans.emplace_back(s.span.start, s.span.end);
    for (const auto& s : out.verified) {
      out_spans.emplace_back(s.span.start, s.span.end);
      CHECK(s.p <= std::min(s.c, s.v) + 1e-15);
      CHECK((s.p == 0.0) == (s.c == 0.0 || s.v == 0.0));
    }
    std::sort(in_spans.begin(), in_spans.end());
    std::sort(out_spans.begin(), out_spans.end());
    CHECK(in_spans == out_spans);
    for (size_t i = 1; i < out.verified.size(); ++i) {
      CHECK_FALSE(poe_order(out.verified[i], out.verified[i - 1]));
    }
  }
}

TEST_CASE("verify_path sends the extended clip and maps failures to zero") {
  MockBackend backend({
      {Role::Verifier, {{"span", json::array({0.0, 10.0})}}, {{"logit_yes", 2.0}, {"logit_no", 0.0}}, ""},
      {Role::Verifier, {{"span", json::array({20.0, 30.0})}}, nullptr, "verifier down"},
  });
  CallRecorder rec;
  AgentClient client(backend, &rec);
  const auto out = verify_path(client, kItem, two_span_path(), ReflectSettings{});
  REQUIRE(out.verified.size() == 2);
  CHECK(out.verified[0].span == TimeSpan{0, 10});
  CHECK(out.verified[0].v == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(out.verified[1].v == 0.0);
  CHECK(out.verified[1].p == 0.0);

  const auto recs = rec.take();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].ordinal == 0);
  CHECK(recs[0].request["query"] == "The moment when x");
  CHECK(recs[0].request["clip"] == json::array({0.0, 12.5}));
  CHECK(recs[1].request["clip"] == json::array({17.5, 32.5}));
  CHECK(recs[0].request["max_frames"] == 64);
  CHECK(recs[0].request["fps"] == 2.0);
}
