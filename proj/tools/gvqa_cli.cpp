// gvqa: run the multi-path pipeline, replay fusion from transcripts, score
// predictions and run the synthetic ablation study.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gvqa/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace gvqa;

constexpr int kExitOk = 0;
constexpr int kExitSystemic = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, sep);) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(std::stod(item));
  return out;
}

// "key=value" overrides; the value is parsed as JSON when it can be, else
// taken as a string.
json parse_overrides(const std::vector<std::string>& sets) {
  json j = json::object();
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw UsageError("--set expects key=value, got '" + kv + "'");
    }
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    j[key] = parsed.is_discarded() ? json(value) : parsed;
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

template <typename T>
std::vector<json> to_docs(const std::vector<T>& items) {
  std::vector<json> docs;
  docs.reserve(items.size());
  for (const auto& item : items) docs.push_back(to_json(item));
  return docs;
}

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets) {
  RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (!sets.empty()) config = config_from_json(parse_overrides(sets), config);
  apply_env_overrides(config);
  config.validate();
  return config;
}

bool has_ground_truth(const std::vector<DatasetRecord>& dataset) {
  return std::any_of(dataset.begin(), dataset.end(),
                     [](const DatasetRecord& r) { return !r.spans.empty(); });
}

struct RunArgs {
  std::string config, dataset, out, transcripts, report, paths, task;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::vector<std::string> sets;
};

int cmd_run(const RunArgs& a) {
  RunConfig config;
  try {
    config = build_config(a.config, a.sets);
    if (!a.paths.empty()) config.paths = parse_path_list(a.paths);
    if (!a.task.empty()) config.task = task_from_string(a.task);
    if (a.seed) config.seed = *a.seed;
    if (a.workers) config.workers = *a.workers;
    config.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }

  const auto dataset = read_dataset(a.dataset);
  auto backend = make_backend(config, dataset);
  const auto run = run_pipeline(config, dataset, *backend);

  write_jsonl(a.out, to_docs(run.predictions));
  write_jsonl(a.transcripts, to_docs(run.transcripts));

  for (const auto& t : run.transcripts) {
    if (!t.error.empty()) {
      std::cerr << "warning: " << t.qid << " path " << path_number(t.path) << " "
                << to_string(t.role) << ": " << t.error << "\n";
    }
  }
  std::cerr << run.predictions.size() - run.failed << "/" << run.predictions.size()
            << " records answered\n";

  if (has_ground_truth(dataset)) {
    const auto report = evaluate_predictions(dataset, run.predictions);
    const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
    write_text(report_path, to_json(report).dump(2) + "\n");
    std::cout << format_table(report);
  }
  if (!dataset.empty() && run.failed == dataset.size()) {
    std::cerr << "error: every record failed\n";
    return kExitSystemic;
  }
  return kExitOk;
}

int cmd_fuse(const std::string& transcripts_path, const std::string& config_path,
             const std::vector<std::string>& sets, const std::string& out) {
  RunConfig config;
  try {
    config = build_config(config_path, sets);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto transcripts = read_transcripts(transcripts_path);
  const auto replay = fuse_replay(transcripts, config);
  for (const auto& w : replay.warnings) std::cerr << "warning: " << w << "\n";
  write_jsonl(out, to_docs(replay.predictions));
  std::cerr << replay.predictions.size() << " predictions replayed, "
            << replay.warnings.size() << " skipped\n";
  return kExitOk;
}

int cmd_eval(const std::string& dataset_path, const std::string& pred_path,
             const std::string& report_path, const std::string& iou, const std::string& iop) {
  const auto dataset = read_dataset(dataset_path);
  const auto predictions = read_predictions(pred_path);
  std::optional<Thresholds> thresholds;
  if (!iou.empty() || !iop.empty()) {
    try {
      const bool has_qa = std::any_of(dataset.begin(), dataset.end(),
                                      [](const DatasetRecord& r) { return r.answer.has_value(); });
      Thresholds t = has_qa ? Thresholds{} : Thresholds::moment_retrieval();
      if (!iou.empty()) t.iou = parse_doubles(iou);
      if (!iop.empty()) t.iop = parse_doubles(iop);
      thresholds = t;
    } catch (const std::exception& e) {
      throw UsageError(std::string("bad threshold list: ") + e.what());
    }
  }
  const auto report = evaluate_predictions(dataset, predictions, thresholds);
  write_text(report_path, to_json(report).dump(2) + "\n");
  std::cout << format_table(report);
  return kExitOk;
}

NoiseModel parse_noise(const std::string& spec) {
  NoiseModel noise;
  for (const auto& kv : split(spec, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--noise expects key=value pairs");
    const std::string key = kv.substr(0, eq);
    const double value = std::stod(kv.substr(eq + 1));
    if (key == "span_jitter") noise.span_jitter = value;
    else if (key == "conf_noise") noise.conf_noise = value;
    else if (key == "answer_acc") noise.answer_accuracy = value;
    else if (key == "raw_candidates") noise.raw_candidates = static_cast<int>(value);
    else if (key == "misled_jitter_scale") noise.misled_jitter_scale = value;
    else throw UsageError("unknown noise key '" + key + "'");
  }
  noise.validate();
  return noise;
}

int cmd_simulate(int n, const std::string& seeds_text, const std::string& noise_text,
                 const std::string& report_path, const std::string& config_path,
                 const std::vector<std::string>& sets, std::optional<int> workers) {
  NoiseModel noise;
  std::vector<std::uint64_t> seeds;
  RunConfig base;
  try {
    noise = parse_noise(noise_text);
    for (const auto& s : split(seeds_text, ',')) seeds.push_back(std::stoull(s));
    if (seeds.empty()) throw UsageError("--seeds is empty");
    if (n < 1) throw UsageError("--n must be >= 1");
    base = build_config(config_path, sets);
    if (workers) base.workers = *workers;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const auto sim = simulate(n, seeds, noise, base);
  write_text(report_path, to_json(sim).dump(2) + "\n");
  std::cout << format_ablation_table(sim);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-path grounded video question answering"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Answer and ground every dataset record");
  run->add_option("--config", run_args.config, "Flat JSON config file")->check(CLI::ExistingFile);
  run->add_option("--dataset", run_args.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Predictions JSONL")->required();
  run->add_option("--transcripts", run_args.transcripts, "Transcript JSONL")->required();
  run->add_option("--report", run_args.report, "Metric report JSON (default <out>.report.json)");
  run->add_option("--paths", run_args.paths, "Enabled paths, e.g. 1,2,3");
  run->add_option("--task", run_args.task, "gqa, qa or mr");
  run->add_option("--seed", run_args.seed, "Seed");
  run->add_option("--workers", run_args.workers, "Worker threads");
  run->add_option("--set", run_args.sets, "Config override key=value (repeatable)");

  std::string fuse_transcripts, fuse_config, fuse_out;
  std::vector<std::string> fuse_sets;
  auto* fuse_cmd = app.add_subcommand("fuse", "Re-run reflection scoring and fusion from transcripts");
  fuse_cmd->add_option("--transcripts", fuse_transcripts, "Transcript JSONL")->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--config", fuse_config, "Flat JSON config file")->check(CLI::ExistingFile);
  fuse_cmd->add_option("--out", fuse_out, "Predictions JSONL")->required();
  fuse_cmd->add_option("--set", fuse_sets, "Config override key=value (repeatable)");

  std::string eval_dataset, eval_pred, eval_report, eval_iou, eval_iop;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a dataset");
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--pred", eval_pred, "Predictions JSONL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--report", eval_report, "Metric report JSON")->required();
  eval_cmd->add_option("--iou-thresholds", eval_iou, "Comma-separated IoU thresholds");
  eval_cmd->add_option("--iop-thresholds", eval_iop, "Comma-separated IoP thresholds");

  int sim_n = 500;
  std::string sim_seeds = "1", sim_noise, sim_report, sim_config;
  std::vector<std::string> sim_sets;
  std::optional<int> sim_workers;
  auto* sim_cmd = app.add_subcommand("simulate", "Ablation study with synthetic agents");
  sim_cmd->add_option("--n", sim_n, "Questions per seed");
  sim_cmd->add_option("--seeds", sim_seeds, "Comma-separated seeds");
  sim_cmd->add_option("--noise", sim_noise,
                      "span_jitter=..,conf_noise=..,answer_acc=..[,raw_candidates=..]");
  sim_cmd->add_option("--report", sim_report, "Report JSON")->required();
  sim_cmd->add_option("--config", sim_config, "Base config file")->check(CLI::ExistingFile);
  sim_cmd->add_option("--set", sim_sets, "Config override key=value (repeatable)");
  sim_cmd->add_option("--workers", sim_workers, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*fuse_cmd) return cmd_fuse(fuse_transcripts, fuse_config, fuse_sets, fuse_out);
    if (*eval_cmd) return cmd_eval(eval_dataset, eval_pred, eval_report, eval_iou, eval_iop);
    if (*sim_cmd) {
      return cmd_simulate(sim_n, sim_seeds, sim_noise, sim_report, sim_config, sim_sets,
                          sim_workers);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSystemic;
  }
  return kExitUsage;
}
