#include "gvqa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gvqa {

using nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Synthetic: return "synthetic";
    case BackendKind::Mock: return "mock";
    case BackendKind::Remote: return "remote";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "synthetic") return BackendKind::Synthetic;
  if (name == "mock") return BackendKind::Mock;
  if (name == "remote") return BackendKind::Remote;
  throw std::invalid_argument("unknown backend '" + std::string(name) +
                              "' (expected synthetic, mock or remote)");
}

std::vector<PathId> parse_path_list(std::string_view text) {
  std::vector<PathId> out;
  std::stringstream in{std::string(text)};
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    size_t used = 0;
    const int n = std::stoi(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad path id '" + item + "'");
    out.push_back(path_from_number(n));
  }
  if (out.empty()) throw std::invalid_argument("empty path list");
  return out;
}

void RunConfig::validate() const {
  noise.validate();
  if (paths.empty()) throw std::invalid_argument("at least one path must be enabled");
  if (path.grounding.top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (!(path.grounding.nms_iou > 0.0 && path.grounding.nms_iou <= 1.0)) {
    throw std::invalid_argument("nms_iou must lie in (0, 1]");
  }
  if (path.clip_k < 1) throw std::invalid_argument("clip_k must be >= 1");
  if (!(reflect.extend_ratio >= 0.0)) throw std::invalid_argument("extend_ratio must be >= 0");
  if (fusion.k < 1) throw std::invalid_argument("fusion_k must be >= 1");
  if (fusion.kmeans.max_iters < 1) throw std::invalid_argument("kmeans_max_iters must be >= 1");
  if (!(fusion.kmeans.eps >= 0.0)) throw std::invalid_argument("kmeans_eps must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!(record_timeout_s > 0.0)) throw std::invalid_argument("record_timeout_s must be > 0");
  if (retry.retries < 0) throw std::invalid_argument("retries must be >= 0");
  for (const auto* l : {&path.limits.grounder, &path.limits.answerer, &path.limits.gqa,
                        &reflect.limits}) {
    if (l->max_tokens < 1 || l->max_frames < 1 || !(l->fps > 0.0)) {
      throw std::invalid_argument("decode limits must be positive");
    }
  }
  if (backend == BackendKind::Mock && fixtures.empty()) {
    throw std::invalid_argument("mock backend needs 'fixtures'");
  }
}

namespace {

void put_limits(json& j, const std::string& role, const DecodeLimits& l) {
  j[role + "_max_tokens"] = l.max_tokens;
  j[role + "_max_frames"] = l.max_frames;
  j[role + "_fps"] = l.fps;
}

DecodeLimits get_limits(const json& j, const std::string& role) {
  return {j.at(role + "_max_tokens").get<int>(), j.at(role + "_max_frames").get<int>(),
          j.at(role + "_fps").get<double>()};
}

RunConfig parse_full(const json& j) {
  RunConfig c;
  c.backend = backend_kind_from_string(j.at("backend").get<std::string>());
  c.backend_url = j.at("backend_url").get<std::string>();
  c.fixtures = j.at("fixtures").get<std::string>();
  c.noise.span_jitter = j.at("span_jitter").get<double>();
  c.noise.conf_noise = j.at("conf_noise").get<double>();
  c.noise.answer_accuracy = j.at("answer_acc").get<double>();
  c.noise.raw_candidates = j.at("raw_candidates").get<int>();
  c.noise.misled_jitter_scale = j.at("misled_jitter_scale").get<double>();
  c.retry.retries = j.at("retries").get<int>();
  c.retry.backoff_base_ms = j.at("backoff_base_ms").get<int>();
  c.retry.backoff_factor = j.at("backoff_factor").get<double>();
  c.retry.timeout_s = j.at("timeout_s").get<double>();
  c.prompts.grounder = j.at("prompt_grounder").get<std::string>();
  c.prompts.gqa = j.at("prompt_gqa").get<std::string>();
  c.prompts.verifier = j.at("prompt_verifier").get<std::string>();

  c.task = task_from_string(j.at("task").get<std::string>());
  const auto& paths = j.at("paths");
  if (paths.is_string()) {
    c.paths = parse_path_list(paths.get<std::string>());
  } else {
    c.paths.clear();
    for (const auto& p : paths) c.paths.push_back(path_from_number(p.get<int>()));
  }
  c.reflection = j.at("reflection").get<bool>();

  c.path.grounding.top_n = j.at("top_n").get<int>();
  c.path.grounding.nms_iou = j.at("nms_iou").get<double>();
  c.path.clip_k = j.at("clip_k").get<int>();
  c.path.limits.grounder = get_limits(j, "grounder");
  c.path.limits.answerer = get_limits(j, "answerer");
  c.path.limits.gqa = get_limits(j, "gqa");
  c.path.limits.verifier = get_limits(j, "verifier");
  c.reflect.extend_ratio = j.at("extend_ratio").get<double>();
  c.reflect.limits = c.path.limits.verifier;

  c.fusion.k = j.at("fusion_k").get<int>();
  c.fusion.report_k = j.at("report_k").get<int>();
  c.fusion.voting = voting_from_string(j.at("voting").get<std::string>());
  c.fusion.kmeans.init = kmeans_init_from_string(j.at("kmeans_init").get<std::string>());
  c.fusion.kmeans.max_iters = j.at("kmeans_max_iters").get<int>();
  c.fusion.kmeans.eps = j.at("kmeans_eps").get<double>();

  c.seed = j.at("seed").get<std::uint64_t>();
  c.fusion.kmeans.seed = c.seed;
  c.workers = j.at("workers").get<int>();
  c.record_timeout_s = j.at("record_timeout_s").get<double>();
  return c;
}

}  // namespace

json to_json(const RunConfig& c) {
  json j;
  j["backend"] = std::string(to_string(c.backend));
  j["backend_url"] = c.backend_url;
  j["fixtures"] = c.fixtures;
  j["span_jitter"] = c.noise.span_jitter;
  j["conf_noise"] = c.noise.conf_noise;
  j["answer_acc"] = c.noise.answer_accuracy;
  j["raw_candidates"] = c.noise.raw_candidates;
  j["misled_jitter_scale"] = c.noise.misled_jitter_scale;
  j["retries"] = c.retry.retries;
  j["backoff_base_ms"] = c.retry.backoff_base_ms;
  j["backoff_factor"] = c.retry.backoff_factor;
  j["timeout_s"] = c.retry.timeout_s;
  j["prompt_grounder"] = c.prompts.grounder;
  j["prompt_gqa"] = c.prompts.gqa;
  j["prompt_verifier"] = c.prompts.verifier;

  j["task"] = std::string(to_string(c.task));
  json paths = json::array();
  for (PathId p : c.paths) paths.push_back(path_number(p));
  j["paths"] = paths;
  j["reflection"] = c.reflection;

  j["top_n"] = c.path.grounding.top_n;
  j["nms_iou"] = c.path.grounding.nms_iou;
  j["clip_k"] = c.path.clip_k;
  put_limits(j, "grounder", c.path.limits.grounder);
  put_limits(j, "answerer", c.path.limits.answerer);
  put_limits(j, "gqa", c.path.limits.gqa);
  put_limits(j, "verifier", c.reflect.limits);
  j["extend_ratio"] = c.reflect.extend_ratio;

  j["fusion_k"] = c.fusion.k;
  j["report_k"] = c.fusion.report_k;
  j["voting"] = std::string(to_string(c.fusion.voting));
  j["kmeans_init"] = std::string(to_string(c.fusion.kmeans.init));
  j["kmeans_max_iters"] = c.fusion.kmeans.max_iters;
  j["kmeans_eps"] = c.fusion.kmeans.eps;

  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["record_timeout_s"] = c.record_timeout_s;
  return j;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const json defaults = to_json(RunConfig{});
  for (const auto& [k, v] : defaults.items()) keys.push_back(k);
  return keys;
}

RunConfig config_from_json(const json& j, RunConfig base) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  json merged = to_json(base);
  for (const auto& [k, v] : j.items()) {
    if (!merged.contains(k)) throw std::invalid_argument("unknown config key '" + k + "'");
    merged[k] = v;
  }
  try {
    RunConfig c = parse_full(merged);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  RunConfig c = config_from_json(j);
  if (!c.fixtures.empty() && std::filesystem::path(c.fixtures).is_relative()) {
    c.fixtures = (path.parent_path() / c.fixtures).string();
  }
  return c;
}

void apply_env_overrides(RunConfig& config) {
  if (const char* url = std::getenv(kBackendUrlEnv); url && *url) config.backend_url = url;
}

}  // namespace gvqa
