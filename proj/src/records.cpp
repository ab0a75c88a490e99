#include "gvqa/records.hpp"

#include <cmath>
#include <fstream>

#include "gvqa/wire.hpp"

namespace gvqa {

using nlohmann::json;

namespace {

json opt_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::optional<int> read_opt_int(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<int>();
}

}  // namespace

json to_json(const DatasetRecord& r) {
  json spans = json::array();
  for (const auto& s : r.spans) spans.push_back(wire::span_pair(s));
  return json{{"qid", r.qid},         {"video", r.video},
              {"duration", r.duration}, {"question", r.question},
              {"options", r.options},  {"answer", opt_int(r.answer)},
              {"spans", spans}};
}

DatasetRecord dataset_record_from_json(const json& j) {
  DatasetRecord r;
  r.qid = j.at("qid").get<std::string>();
  r.video = j.value("video", r.qid);
  r.duration = j.at("duration").get<double>();
  r.question = j.at("question").get<std::string>();
  r.options = j.value("options", std::vector<std::string>{});
  r.answer = read_opt_int(j, "answer");
  if (auto it = j.find("spans"); it != j.end() && !it->is_null()) {
    for (const auto& s : *it) r.spans.push_back(wire::parse_span_pair(s));
  }

  if (r.qid.empty()) throw std::invalid_argument("record without qid");
  if (!(r.duration > 0.0) || !std::isfinite(r.duration)) {
    throw std::invalid_argument(r.qid + ": duration must be positive");
  }
  if (r.answer) {
    if (r.options.size() < 2) {
      throw std::invalid_argument(r.qid + ": needs at least two options");
    }
    if (*r.answer < 0 || *r.answer >= static_cast<int>(r.options.size())) {
      throw std::invalid_argument(r.qid + ": answer index out of range");
    }
  }
  for (const auto& s : r.spans) {
    if (!s.valid() || s.end > r.duration) {
      throw std::invalid_argument(r.qid + ": span outside [0, duration]");
    }
  }
  return r;
}

json to_json(const Prediction& p) {
  json spans = json::array();
  for (const auto& s : p.spans) spans.push_back({s.span.start, s.span.end, s.weight});
  json per_path = json::array();
  for (const auto& pp : p.per_path) {
    per_path.push_back({{"path", path_number(pp.path)},
                        {"failed", pp.failed},
                        {"answer", opt_int(pp.answer)},
                        {"best_span", pp.best_span ? wire::span_pair(*pp.best_span)
                                                   : json(nullptr)},
                        {"confidence", pp.confidence}});
  }
  return json{{"qid", p.qid},
              {"status", p.failed ? "failed" : "ok"},
              {"answer", opt_int(p.answer)},
              {"spans", spans},
              {"per_path", per_path}};
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.qid = j.at("qid").get<std::string>();
  p.failed = j.value("status", std::string("ok")) == "failed";
  p.answer = read_opt_int(j, "answer");
  if (auto it = j.find("spans"); it != j.end() && !it->is_null()) {
    for (const auto& s : *it) {
      if (!s.is_array() || s.size() < 2) throw std::invalid_argument(p.qid + ": bad span");
      p.spans.push_back({{s[0].get<double>(), s[1].get<double>()},
                         s.size() > 2 ? s[2].get<double>() : 0.0});
    }
  }
  if (auto it = j.find("per_path"); it != j.end() && !it->is_null()) {
    for (const auto& pp : *it) {
      PathSummary s;
      s.path = path_from_number(pp.at("path").get<int>());
      s.failed = pp.value("failed", false);
      s.answer = read_opt_int(pp, "answer");
      if (auto b = pp.find("best_span"); b != pp.end() && !b->is_null()) {
        s.best_span = wire::parse_span_pair(*b);
      }
      s.confidence = pp.value("confidence", 0.0);
      p.per_path.push_back(s);
    }
  }
  return p;
}

json to_json(const TranscriptRecord& r) {
  json j{{"qid", r.qid},
         {"path", path_number(r.path)},
         {"role", std::string(to_string(r.role))},
         {"ordinal", r.ordinal},
         {"request", r.request},
         {"response", r.response},
         {"latency_ms", r.latency_ms}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

TranscriptRecord transcript_record_from_json(const json& j) {
  TranscriptRecord r;
  r.qid = j.at("qid").get<std::string>();
  r.path = path_from_number(j.at("path").get<int>());
  r.role = role_from_string(j.at("role").get<std::string>());
  r.ordinal = j.at("ordinal").get<int>();
  r.request = j.at("request");
  r.response = j.value("response", json());
  r.error = j.value("error", std::string());
  r.latency_ms = j.value("latency_ms", 0.0);
  return r;
}

std::string to_jsonl_line(const json& j) { return j.dump() + "\n"; }

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> docs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return docs;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& docs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& d : docs) out << to_jsonl_line(d);
}

namespace {

template <typename T, typename Fn>
std::vector<T> read_typed(const std::filesystem::path& path, Fn&& parse) {
  std::vector<T> out;
  int index = 0;
  for (const auto& doc : read_jsonl(path)) {
    ++index;
    try {
      out.push_back(parse(doc));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ": record " + std::to_string(index) +
                               ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  return read_typed<DatasetRecord>(path, dataset_record_from_json);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  return read_typed<Prediction>(path, prediction_from_json);
}

std::vector<TranscriptRecord> read_transcripts(const std::filesystem::path& path) {
  return read_typed<TranscriptRecord>(path, transcript_record_from_json);
}

}  // namespace gvqa
