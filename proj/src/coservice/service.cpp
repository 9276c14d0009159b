#include <filesystem>

#include "json.hpp"
#include "mrin/coservice.hpp"

namespace mrin {
namespace {

using json = nlohmann::ordered_json;

json parse_body(const std::string& body) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw RequestError(400, "BAD_REQUEST", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw RequestError(400, "BAD_REQUEST", std::string("invalid JSON: ") + e.what());
  }
}

void allow_keys(const json& j, std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) throw RequestError(400, "BAD_REQUEST", "unexpected field '" + it.key() + "'");
  }
}

TileGrid read_level(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw RequestError(400, "BAD_REQUEST", std::string("'") + key + "' must be an array of glyph rows");
  }
  std::vector<std::string> rows;
  for (const auto& r : *it) {
    if (!r.is_string()) throw RequestError(400, "BAD_LEVEL", "grid rows must be strings");
    rows.push_back(r.get<std::string>());
  }
  try {
    return from_glyph_rows(rows);
  } catch (const std::exception& e) {
    throw RequestError(400, "BAD_LEVEL", e.what());
  }
}

void check_shape(const TileGrid& level, const Model& model) {
  const auto& c = model.params.config;
  if (level.width() != c.width || level.height() != c.height) {
    throw RequestError(400, "SHAPE_MISMATCH",
                       "level is " + std::to_string(level.width()) + "x" +
                           std::to_string(level.height()) + ", model expects " +
                           std::to_string(c.width) + "x" + std::to_string(c.height));
  }
}

json session_payload(const Session& s) {
  return json{{"schema", kSessionSchema},
              {"version", kWireVersion},
              {"turn_count", s.turns.size()},
              {"session", json::parse(serialize_session_record(s))}};
}

void check_pairing(const ServiceArtifacts& a) {
  if (a.model.fingerprint != a.mrin.fingerprint) {
    throw FingerprintMismatch("model fingerprint " + a.model.fingerprint +
                              " does not match MRIN fingerprint " + a.mrin.fingerprint);
  }
  std::vector<std::string> expected;
  for (const auto& s : a.training_sessions) {
    for (const auto& t : s.turns) {
      if (t.actor == Actor::kAgent) expected.push_back(s.session_id);
    }
  }
  if (expected != a.mrin.instance_sessions) {
    throw FingerprintMismatch("training corpus does not match the MRIN instance table");
  }
}

}  // namespace

ServiceArtifacts load_artifacts(const std::filesystem::path& model_dir,
                                const std::filesystem::path& sessions_path) {
  ServiceArtifacts a;
  a.model = load_model(model_dir / kModelFile);
  a.mrin = load_mrin(model_dir / kMrinFile).mrin;
  a.training_sessions = load_sessions(sessions_path);
  check_pairing(a);
  return a;
}

CoService::CoService(ServiceArtifacts artifacts, ServiceOptions options)
    : options_(std::move(options)) {
  check_pairing(artifacts);
  artifacts_ = std::make_shared<const ServiceArtifacts>(std::move(artifacts));
  if (!options_.live_log.empty() && std::filesystem::exists(options_.live_log)) {
    for (auto& s : load_sessions(options_.live_log)) {
      live_order_.push_back(s.session_id);
      live_.emplace(s.session_id, std::move(s));
    }
  }
}

std::shared_ptr<const ServiceArtifacts> CoService::snapshot() const {
  std::lock_guard lock(artifacts_mu_);
  return artifacts_;
}

std::string CoService::suggest_json(const std::string& body) const {
  const auto j = parse_body(body);
  allow_keys(j, {"schema", "version", "level", "threshold", "top_k"});
  const auto level = read_level(j, "level");
  const auto art = snapshot();
  check_shape(level, art->model);
  SuggestOptions opts = options_.suggest;
  if (j.contains("threshold")) {
    if (!j["threshold"].is_number()) throw RequestError(400, "BAD_REQUEST", "'threshold' must be a number");
    opts.threshold = j["threshold"].get<double>();
  }
  if (j.contains("top_k")) {
    if (!j["top_k"].is_number_integer() || j["top_k"].get<int>() < 0) {
      throw RequestError(400, "BAD_REQUEST", "'top_k' must be a non-negative integer");
    }
    opts.top_k = j["top_k"].get<int>();
  }
  return suggestion_to_json(suggest(art->model, level, opts));
}

std::string CoService::explain_json(const std::string& body) const {
  const auto j = parse_body(body);
  allow_keys(j, {"schema", "version", "level"});
  const auto level = read_level(j, "level");
  const auto art = snapshot();
  check_shape(level, art->model);
  return explanation_to_json(
      explain(art->model, art->mrin, art->training_sessions, level, options_.layer, options_.norm));
}

std::string CoService::append_turn_json(const std::string& body) {
  const auto j = parse_body(body);
  allow_keys(j, {"schema", "version", "session_id", "initial", "turn"});
  if (!j.contains("session_id") || !j["session_id"].is_string() ||
      j["session_id"].get<std::string>().empty()) {
    throw RequestError(400, "BAD_REQUEST", "'session_id' must be a non-empty string");
  }
  const auto id = j["session_id"].get<std::string>();
  if (!j.contains("turn")) throw RequestError(400, "BAD_REQUEST", "missing 'turn'");
  Turn turn;
  try {
    turn = parse_turn_record(j["turn"].dump());
  } catch (const SchemaViolation& e) {
    throw RequestError(400, "BAD_REQUEST", e.what());
  }

  std::lock_guard lock(sessions_mu_);
  auto it = live_.find(id);
  Session candidate;
  if (it == live_.end()) {
    if (!j.contains("initial")) {
      throw RequestError(404, "NOT_FOUND", "unknown session " + id + " and no 'initial' level given");
    }
    candidate.session_id = id;
    candidate.initial = read_level(j, "initial");
    candidate.final_level = candidate.initial;
  } else {
    candidate = it->second;
    if (j.contains("initial") && read_level(j, "initial") != candidate.initial) {
      throw RequestError(409, "INVALID_TURN", "'initial' differs from the recorded session start");
    }
  }
  try {
    candidate.final_level = mrin::apply(candidate.final_level, turn.changes);
    candidate.turns.push_back(std::move(turn));
    validate_session(candidate);
  } catch (const std::exception& e) {
    throw RequestError(409, "INVALID_TURN", e.what());
  }
  if (it == live_.end()) live_order_.push_back(id);
  auto& stored = live_[id];
  stored = std::move(candidate);
  persist_locked();
  return session_payload(stored).dump();
}

std::string CoService::get_session_json(const std::string& session_id) const {
  {
    std::lock_guard lock(sessions_mu_);
    auto it = live_.find(session_id);
    if (it != live_.end()) return session_payload(it->second).dump();
  }
  const auto art = snapshot();
  for (const auto& s : art->training_sessions) {
    if (s.session_id == session_id) return session_payload(s).dump();
  }
  throw RequestError(404, "NOT_FOUND", "unknown session " + session_id);
}

std::string CoService::health_json() const {
  const auto art = snapshot();
  std::size_t live = 0;
  {
    std::lock_guard lock(sessions_mu_);
    live = live_.size();
  }
  const auto& c = art->model.params.config;
  return json{{"schema", kHealthSchema},
              {"version", kWireVersion},
              {"status", "ok"},
              {"model_fingerprint", art->model.fingerprint},
              {"width", c.width},
              {"height", c.height},
              {"training_sessions", art->training_sessions.size()},
              {"training_instances", art->mrin.instance_sessions.size()},
              {"live_sessions", live}}
      .dump();
}

std::string CoService::reload_json() {
  if (options_.model_dir.empty() || options_.sessions_path.empty()) {
    throw RequestError(409, "RELOAD_UNAVAILABLE", "service was not started from a model directory");
  }
  ServiceArtifacts fresh;
  try {
    fresh = load_artifacts(options_.model_dir, options_.sessions_path);
  } catch (const std::exception& e) {
    throw RequestError(503, "RELOAD_FAILED", e.what());
  }
  {
    std::lock_guard lock(artifacts_mu_);
    artifacts_ = std::make_shared<const ServiceArtifacts>(std::move(fresh));
  }
  return health_json();
}

std::vector<Session> CoService::live_sessions() const {
  std::lock_guard lock(sessions_mu_);
  std::vector<Session> out;
  for (const auto& id : live_order_) out.push_back(live_.at(id));
  return out;
}

void CoService::persist_locked() const {
  if (options_.live_log.empty()) return;
  std::vector<Session> all;
  for (const auto& id : live_order_) all.push_back(live_.at(id));
  auto tmp = options_.live_log;
  tmp += ".tmp";
  save_sessions(all, tmp);
  std::filesystem::rename(tmp, options_.live_log);
}

HttpReply CoService::handle(const std::string& method, const std::string& path,
                            const std::string& body) {
  static const std::string kSessionPrefix = "/session/";
  try {
    if (path == "/suggest") {
      if (method != "POST") throw RequestError(405, "METHOD_NOT_ALLOWED", "use POST /suggest");
      return {200, suggest_json(body)};
    }
    if (path == "/explain") {
      if (method != "POST") throw RequestError(405, "METHOD_NOT_ALLOWED", "use POST /explain");
      return {200, explain_json(body)};
    }
    if (path == "/session/append-turn") {
      if (method != "POST") {
        throw RequestError(405, "METHOD_NOT_ALLOWED", "use POST /session/append-turn");
      }
      return {200, append_turn_json(body)};
    }
    if (path == "/health") {
      if (method != "GET") throw RequestError(405, "METHOD_NOT_ALLOWED", "use GET /health");
      return {200, health_json()};
    }
    if (path == "/reload") {
      if (method != "POST") throw RequestError(405, "METHOD_NOT_ALLOWED", "use POST /reload");
      return {200, reload_json()};
    }
    if (path.rfind(kSessionPrefix, 0) == 0 && path.size() > kSessionPrefix.size()) {
      if (method != "GET") throw RequestError(405, "METHOD_NOT_ALLOWED", "use GET /session/{id}");
      return {200, get_session_json(path.substr(kSessionPrefix.size()))};
    }
    throw RequestError(404, "NOT_FOUND", "no endpoint " + method + " " + path);
  } catch (const RequestError& e) {
    return {e.status, error_to_json(e.code, e.what())};
  } catch (const std::exception& e) {
    return {500, error_to_json("INTERNAL", e.what())};
  }
}

}  // namespace mrin
