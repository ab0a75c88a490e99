#include <fstream>

#include "gvqa/backends.hpp"
#include "gvqa/wire.hpp"

namespace gvqa {

MockBackend::MockBackend(std::vector<MockFixture> fixtures)
    : fixtures_(std::move(fixtures)) {}

MockBackend MockBackend::from_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fixtures " + path.string());
  std::vector<MockFixture> fixtures;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MockFixture f;
      f.role = role_from_string(j.at("role").get<std::string>());
      f.match = j.value("match", nlohmann::json::object());
      f.response = j.value("response", nlohmann::json());
      f.error = j.value("error", std::string());
      if (f.response.is_null() && f.error.empty()) {
        throw std::invalid_argument("fixture needs 'response' or 'error'");
      }
      fixtures.push_back(std::move(f));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return MockBackend(std::move(fixtures));
}

const nlohmann::json& MockBackend::lookup(Role role,
                                          const nlohmann::json& request) const {
  for (const auto& f : fixtures_) {
    if (f.role != role) continue;
    bool hit = true;
    for (const auto& [k, v] : f.match.items()) {
      auto it = request.find(k);
      if (it == request.end() || *it != v) {
        hit = false;
        break;
      }
    }
    if (!hit) continue;
    if (!f.error.empty()) throw TransportError(f.error);
    return f.response;
  }
  throw FixtureMissing("no " + std::string(to_string(role)) +
                       " fixture for request " + request.dump());
}

std::vector<ScoredSpan> MockBackend::ground(const GroundRequest& req) {
  return wire::parse_ground_response(lookup(Role::Grounder, wire::to_json(req)));
}

int MockBackend::answer(const AnswerRequest& req) {
  return wire::parse_answer_response(lookup(Role::Answerer, wire::to_json(req)));
}

GqaResponse MockBackend::gqa(const GqaRequest& req) {
  return wire::parse_gqa_response(lookup(Role::Gqa, wire::to_json(req)));
}

VerifyResponse MockBackend::verify(const VerifyRequest& req) {
  return wire::parse_verify_response(lookup(Role::Verifier, wire::to_json(req)));
}

}  // namespace gvqa
