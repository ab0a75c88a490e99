#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>

#include "gvqa/config.hpp"
#include "gvqa/eval.hpp"
#include "gvqa/records.hpp"

using namespace gvqa;
using nlohmann::json;

namespace {

SampleScore sample(std::optional<int> pa, std::vector<TimeSpan> ps, std::optional<int> ga,
                   std::vector<TimeSpan> gs) {
  return score_sample("x", pa, ps, ga, gs);
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("gvqa_" + name);
}

}  // namespace

TEST_CASE("per-sample scores") {
  auto a = sample(1, {{4, 6}}, 1, {{0, 10}});
  CHECK(a.top1_iop == 1.0);
  CHECK(a.top1_iou == doctest::Approx(0.2));
  CHECK(a.gqa_correct);

  auto b = sample(1, {{0, 10}}, 1, {{4, 6}});
  CHECK(b.top1_iop == doctest::Approx(0.2));
  CHECK_FALSE(b.gqa_correct);

  auto c = sample(1, {}, 1, {{4, 6}});
  CHECK(c.top1_iou == 0.0);
  CHECK(c.top1_iop == 0.0);
  CHECK(c.qa_correct);
  CHECK_FALSE(c.gqa_correct);

  // Only the top-ranked span counts; the best of several GT spans is kept.
  auto d = sample(0, {{20, 30}, {0, 10}}, 0, {{0, 10}, {20, 25}});
  CHECK(d.top1_iop == doctest::Approx(0.5));
  CHECK(d.top1_iou == doctest::Approx(0.5));

  auto e = sample(0, {{5, 5}}, 0, {{0, 10}});
  CHECK(e.top1_iop == 0.0);

  auto f = sample(std::nullopt, {{0, 10}}, 0, {{0, 10}});
  CHECK_FALSE(f.qa_correct);
}

TEST_CASE("aggregate") {
  const std::vector<SampleScore> two{sample(1, {{4, 6}}, 1, {{0, 10}}),
                                     sample(1, {{0, 10}}, 1, {{4, 6}})};
  const auto r = aggregate(two);
  CHECK(r.n == 2);
  CHECK(*r.m_iop == doctest::Approx(60.0));
  CHECK(r.r_iop.at(0.5) == doctest::Approx(50.0));
  CHECK(*r.acc_qa == doctest::Approx(100.0));
  CHECK(*r.acc_gqa == doctest::Approx(50.0));
  CHECK(r.m_iou == doctest::Approx(20.0));
  CHECK(r.r_iou.size() == 3);
  CHECK(r.r_iop.size() == 2);

  const std::vector<SampleScore> perfect{sample(2, {{1, 2}}, 2, {{1, 2}})};
  const auto p = aggregate(perfect);
  CHECK(*p.acc_gqa == 100.0);
  CHECK(p.m_iou == 100.0);
  for (const auto& [t, v] : p.r_iou) CHECK(v == 100.0);

  CHECK_THROWS_AS(aggregate(std::vector<SampleScore>{}), std::invalid_argument);
}

TEST_CASE("moment retrieval report") {
  const std::vector<SampleScore> one{sample(std::nullopt, {{1, 2}}, std::nullopt, {{1, 2}})};
  const auto a = evaluate_mr(one);
  CHECK_FALSE(a.acc_qa);
  CHECK_FALSE(a.m_iop);
  CHECK(a.r_iou.at(0.7) == 100.0);

  const std::vector<SampleScore> half{sample(std::nullopt, {{0, 10}}, std::nullopt, {{5, 15}})};
  const auto b = evaluate_mr(half);
  CHECK(b.r_iou.at(0.3) == 100.0);
  CHECK(b.r_iou.at(0.5) == 0.0);
  CHECK(b.m_iou == doctest::Approx(33.333).epsilon(1e-4));

  const std::vector<SampleScore> none{sample(std::nullopt, {}, std::nullopt, {{5, 15}})};
  const auto c = evaluate_mr(none);
  CHECK(c.m_iou == 0.0);
  for (const auto& [t, v] : c.r_iou) CHECK(v == 0.0);
}

TEST_CASE("metric report JSON round-trip and table") {
  const std::vector<SampleScore> two{sample(1, {{4, 6}}, 1, {{0, 10}}),
                                     sample(0, {{0, 10}}, 1, {{4, 6}})};
  const auto r = aggregate(two);
  const auto back = metric_report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(to_json(r)["r_iou"].contains("0.3"));
  const auto table = format_table(r);
  CHECK(table.find("Acc@GQA") != std::string::npos);
  CHECK(table.find("IoU@0.5") != std::string::npos);
  CHECK(table.find("50.0") != std::string::npos);
  CHECK(threshold_key(0.5) == "0.5");
}

// Records -----------------------------------------------------------------------

TEST_CASE("dataset record validation") {
  json ok = {{"qid", "a"},      {"video", "v"},     {"duration", 30.0}, {"question", "why?"},
             {"options", {"x", "y"}}, {"answer", 1}, {"spans", {{1.0, 2.0}}}};
  const auto r = dataset_record_from_json(ok);
  CHECK(r.answer == 1);
  CHECK(r.spans.front() == TimeSpan{1, 2});

  auto bad = ok;
  bad["answer"] = 2;
  CHECK_THROWS_AS(dataset_record_from_json(bad), std::invalid_argument);
  bad = ok;
  bad["options"] = {"x"};
  CHECK_THROWS_AS(dataset_record_from_json(bad), std::invalid_argument);
  bad = ok;
  bad["spans"] = {{1.0, 31.0}};
  CHECK_THROWS_AS(dataset_record_from_json(bad), std::invalid_argument);
  bad = ok;
  bad["duration"] = 0;
  CHECK_THROWS_AS(dataset_record_from_json(bad), std::invalid_argument);

  json mr = ok;
  mr.erase("answer");
  mr.erase("options");
  CHECK_FALSE(dataset_record_from_json(mr).answer);
}

TEST_CASE("JSONL round-trip of random records") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<json> docs;
  std::vector<DatasetRecord> data;
  std::vector<Prediction> preds;
  std::vector<TranscriptRecord> trans;
  for (int i = 0; i < 100; ++i) {
    DatasetRecord d;
    d.qid = "q" + std::to_string(i) + "\"\\ é";
    d.video = "v" + std::to_string(i);
    d.duration = 10 + 100 * u(rng);
    d.question = "why " + std::to_string(u(rng)) + "?";
    const int n = 2 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) d.options.push_back("opt " + std::to_string(k));
    if (rng() % 3) d.answer = static_cast<int>(rng() % n);
    const double s = d.duration * u(rng);
    d.spans.push_back({s, s + (d.duration - s) * u(rng)});
    data.push_back(d);

    Prediction p;
    p.qid = d.qid;
    p.failed = rng() % 5 == 0;
    if (!p.failed) {
      p.answer = static_cast<int>(rng() % n);
      p.spans.push_back({{s, s + 1}, u(rng)});
      p.per_path.push_back({PathId::Joint, false, 1, TimeSpan{s, s + 1}, u(rng)});
      p.per_path.push_back({PathId::GroundFirst, true, std::nullopt, std::nullopt, 0.0});
    }
    preds.push_back(p);

    TranscriptRecord t{d.qid, PathId::AnswerFirst, Role::Verifier, i % 5,
                       {{"query", d.question}, {"span", {s, s + 1}}},
                       (rng() % 2) ? json{{"logit_yes", u(rng)}, {"logit_no", 0.0}} : json(nullptr),
                       (rng() % 2) ? "" : "boom", 0.0};
    trans.push_back(t);
  }

  for (const auto& d : data) CHECK(to_json(dataset_record_from_json(to_json(d))) == to_json(d));
  for (const auto& p : preds) CHECK(to_json(prediction_from_json(to_json(p))) == to_json(p));
  for (const auto& t : trans) CHECK(to_json(transcript_record_from_json(to_json(t))) == to_json(t));

  const auto path = temp_file("roundtrip.jsonl");
  std::vector<json> pdocs;
  for (const auto& p : preds) pdocs.push_back(to_json(p));
  write_jsonl(path, pdocs);
  const auto back = read_predictions(path);
  REQUIRE(back.size() == preds.size());
  for (size_t i = 0; i < back.size(); ++i) CHECK(to_json(back[i]) == pdocs[i]);

  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::getline(in, line);
  CHECK(line + "\n" == to_jsonl_line(pdocs[0]));
  CHECK(line.find('\n') == std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("JSONL errors carry the line number") {
  const auto path = temp_file("broken.jsonl");
  {
    std::ofstream out(path);
    out << "{\"a\": 1}\n{oops\n";
  }
  try {
    read_jsonl(path);
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  CHECK_THROWS(read_jsonl(temp_file("does_not_exist.jsonl")));
  std::filesystem::remove(path);
}

// Config ------------------------------------------------------------------------

TEST_CASE("config defaults and overrides") {
  const RunConfig d;
  CHECK(d.path.grounding.top_n == 5);
  CHECK(d.path.grounding.nms_iou == 0.75);
  CHECK(d.reflect.extend_ratio == 0.5);
  CHECK(d.path.clip_k == 1);
  CHECK(d.fusion.k == 5);
  CHECK(d.fusion.report_k == 3);
  CHECK(d.fusion.voting == VotingMode::SpanLevel);
  CHECK(d.retry.retries == 3);
  CHECK(d.retry.backoff_base_ms == 250);
  CHECK(d.retry.timeout_s == 30.0);
  CHECK(d.record_timeout_s == 120.0);
  CHECK(d.path.limits.answerer.max_tokens == 256);
  CHECK(d.path.limits.verifier.fps == 2.0);

  const auto c = config_from_json({{"fusion_k", 1},
                                   {"voting", "path_level"},
                                   {"paths", "1,3"},
                                   {"task", "mr"},
                                   {"verifier_max_frames", 32},
                                   {"span_jitter", 0.2}});
  CHECK(c.fusion.k == 1);
  CHECK(c.fusion.voting == VotingMode::PathLevel);
  CHECK(c.paths == std::vector<PathId>{PathId::GroundFirst, PathId::Joint});
  CHECK(c.task == TaskKind::MomentRetrieval);
  CHECK(c.path.limits.verifier.max_frames == 32);
  CHECK(c.noise.span_jitter == 0.2);

  CHECK(config_from_json(to_json(c)).fusion.voting == VotingMode::PathLevel);
  CHECK(to_json(config_from_json(to_json(c))) == to_json(c));

  CHECK_THROWS_AS(config_from_json({{"fusion_kk", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"fusion_k", "five"}}), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"fusion_k", 0}}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json({{"nms_iou", 0}}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_path_list("1,4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_path_list(""), std::invalid_argument);
  CHECK(parse_path_list("3, 2") == std::vector<PathId>{PathId::Joint, PathId::AnswerFirst});
  CHECK(config_keys().size() == to_json(RunConfig{}).size());
}

TEST_CASE("config files and the backend URL override") {
  const auto dir = std::filesystem::temp_directory_path() / "gvqa_cfg_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "run.json");
    out << R"({"backend": "mock", "fixtures": "fx.jsonl", "workers": 4})";
  }
  const auto c = load_config(dir / "run.json");
  CHECK(c.backend == BackendKind::Mock);
  CHECK(std::filesystem::path(c.fixtures) == dir / "fx.jsonl");
  CHECK(c.workers == 4);

  RunConfig r;
  ::setenv(kBackendUrlEnv, "http://example.invalid:9000", 1);
  apply_env_overrides(r);
  ::unsetenv(kBackendUrlEnv);
  CHECK(r.backend_url == "http://example.invalid:9000");
  std::filesystem::remove_all(dir);
}
