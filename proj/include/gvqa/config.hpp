#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "gvqa/backends.hpp"
#include "gvqa/fuse.hpp"
#include "gvqa/paths.hpp"
#include "gvqa/reflect.hpp"

namespace gvqa {

enum class BackendKind { Synthetic, Mock, Remote };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

/// Environment variable that overrides `backend_url`.
inline constexpr const char* kBackendUrlEnv = "GVQA_BACKEND_URL";

struct RunConfig {
  BackendKind backend = BackendKind::Synthetic;
  std::string backend_url;
  std::string fixtures;  // mock backend fixture file
  NoiseModel noise;      // synthetic backend
  RetryPolicy retry;
  PromptTemplates prompts = PromptTemplates::defaults();

  TaskKind task = TaskKind::GroundedQA;
  std::vector<PathId> paths{PathId::GroundFirst, PathId::AnswerFirst, PathId::Joint};
  bool reflection = true;

  PathSettings path;
  ReflectSettings reflect;
  FusionOptions fusion;

  std::uint64_t seed = 0;
  int workers = 1;
  double record_timeout_s = 120.0;

  void validate() const;
};

/// Flat JSON object; each key overrides the matching default. Unknown keys are
/// rejected. Keys are listed by `config_keys()`.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Applies the backend URL environment override, if set.
void apply_env_overrides(RunConfig& config);

std::vector<std::string> config_keys();

/// "1,2,3" -> paths
std::vector<PathId> parse_path_list(std::string_view text);

}  // namespace gvqa
