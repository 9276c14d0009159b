#include "mrin/sessionlog.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mrin {
namespace {

using json = nlohmann::ordered_json;

const char* actor_name(Actor a) { return a == Actor::kHuman ? "HUMAN" : "AGENT"; }
const char* verdict_name(Verdict v) { return v == Verdict::kKeep ? "KEEP" : "DELETE"; }

std::string glyph_str(TileId t) { return std::string(1, Legend::standard().glyph(t)); }

json change_to_json(const CellChange& c) {
  return json{{"x", c.x}, {"y", c.y}, {"before", glyph_str(c.before)},
              {"after", glyph_str(c.after)}};
}

json turn_to_json(const Turn& t) {
  json changes = json::array();
  for (const auto& c : t.changes) changes.push_back(change_to_json(c));
  json decisions = json::array();
  for (const auto& d : t.decisions) {
    decisions.push_back(json{{"x", d.target.x},
                             {"y", d.target.y},
                             {"tile", glyph_str(d.target.tile)},
                             {"verdict", verdict_name(d.verdict)}});
  }
  return json{{"actor", actor_name(t.actor)},
              {"changes", std::move(changes)},
              {"decisions", std::move(decisions)}};
}

json session_to_json(const Session& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(turn_to_json(t));
  return json{{"session_id", s.session_id},
              {"initial", to_glyph_rows(s.initial)},
              {"turns", std::move(turns)},
              {"final_level", to_glyph_rows(s.final_level)}};
}

// Strict field access: every error is reported against the record's line.
class RecordReader {
 public:
  explicit RecordReader(int line) : line_(line) {}

  [[noreturn]] void fail(const std::string& what) const { throw SchemaViolation(line_, what); }

  const json& field(const json& obj, const char* key) const {
    if (!obj.is_object()) fail("expected object");
    auto it = obj.find(key);
    if (it == obj.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  void exact_keys(const json& obj, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail("expected object");
    if (obj.size() != keys.size()) fail("unexpected field count");
    for (auto k : keys) field(obj, k);
  }

  int integer(const json& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
  }

  std::string string(const json& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  TileId tile(const json& obj, const char* key) const {
    auto s = string(obj, key);
    if (s.size() != 1) fail(std::string("field '") + key + "' must be one glyph");
    auto t = Legend::standard().tile_for_glyph(s[0]);
    if (!t) fail("unknown glyph '" + s + "'");
    return *t;
  }

  TileGrid grid(const json& obj, const char* key) const {
    const auto& v = field(obj, key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array of rows");
    std::vector<std::string> rows;
    for (const auto& r : v) {
      if (!r.is_string()) fail("grid rows must be strings");
      rows.push_back(r.get<std::string>());
    }
    try {
      return from_glyph_rows(rows);
    } catch (const std::exception& e) {
      fail(std::string("field '") + key + "': " + e.what());
    }
  }

 private:
  int line_;
};

Turn turn_from_json(const RecordReader& r, const json& tj) {
  r.exact_keys(tj, {"actor", "changes", "decisions"});
  Turn t;
  auto actor = r.string(tj, "actor");
  if (actor == "HUMAN") {
    t.actor = Actor::kHuman;
  } else if (actor == "AGENT") {
    t.actor = Actor::kAgent;
  } else {
    r.fail("unknown actor " + actor);
  }
  const auto& changes = r.field(tj, "changes");
  if (!changes.is_array()) r.fail("'changes' must be an array");
  for (const auto& cj : changes) {
    r.exact_keys(cj, {"x", "y", "before", "after"});
    t.changes.push_back(
        {r.integer(cj, "x"), r.integer(cj, "y"), r.tile(cj, "before"), r.tile(cj, "after")});
  }
  const auto& decisions = r.field(tj, "decisions");
  if (!decisions.is_array()) r.fail("'decisions' must be an array");
  for (const auto& dj : decisions) {
    r.exact_keys(dj, {"x", "y", "tile", "verdict"});
    Decision d;
    d.target = {r.integer(dj, "x"), r.integer(dj, "y"), r.tile(dj, "tile")};
    auto verdict = r.string(dj, "verdict");
    if (verdict == "KEEP") {
      d.verdict = Verdict::kKeep;
    } else if (verdict == "DELETE") {
      d.verdict = Verdict::kDelete;
    } else {
      r.fail("unknown verdict " + verdict);
    }
    t.decisions.push_back(d);
  }
  return t;
}

Session session_from_json(const json& j, int line) {
  RecordReader r(line);
  r.exact_keys(j, {"session_id", "initial", "turns", "final_level"});
  Session s;
  s.session_id = r.string(j, "session_id");
  s.initial = r.grid(j, "initial");
  s.final_level = r.grid(j, "final_level");
  const auto& turns = r.field(j, "turns");
  if (!turns.is_array()) r.fail("'turns' must be an array");
  for (const auto& tj : turns) s.turns.push_back(turn_from_json(r, tj));
  try {
    validate_session(s);
  } catch (const SchemaViolation&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  return s;
}

json parse_line(const std::string& text, int line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaViolation(line, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

SchemaViolation::SchemaViolation(int l, const std::string& what)
    : std::runtime_error("session log line " + std::to_string(l) + ": " + what), line(l) {}

TileGrid level_before_turn(const Session& session, std::size_t turn_index) {
  if (turn_index > session.turns.size()) throw std::out_of_range("turn index");
  TileGrid level = session.initial;
  for (std::size_t i = 0; i < turn_index; ++i) level = mrin::apply(level, session.turns[i].changes);
  return level;
}

TileGrid replay(const Session& session) {
  return level_before_turn(session, session.turns.size());
}

void validate_session(const Session& session) {
  if (session.session_id.empty()) throw std::invalid_argument("empty session_id");
  if (session.initial.width() != session.final_level.width() ||
      session.initial.height() != session.final_level.height()) {
    throw DimensionMismatch("initial and final_level differ in size");
  }
  std::set<Placement> agent_added;
  TileGrid level = session.initial;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const auto& turn = session.turns[i];
    if (turn.actor == Actor::kAgent && !turn.decisions.empty()) {
      throw std::invalid_argument("turn " + std::to_string(i) + ": AGENT turns carry no decisions");
    }
    for (const auto& d : turn.decisions) {
      if (!agent_added.contains(d.target)) {
        throw std::invalid_argument("turn " + std::to_string(i) +
                                    ": decision does not reference an earlier AGENT addition");
      }
    }
    level = mrin::apply(level, turn.changes);
    if (turn.actor == Actor::kAgent) {
      for (const auto& c : turn.changes) {
        if (!is_action_tile(c.after)) {
          throw std::invalid_argument("turn " + std::to_string(i) + ": agent placed a non-action tile");
        }
        if (c.after != kEmpty) agent_added.insert({c.x, c.y, c.after});
      }
    }
  }
  if (level != session.final_level) {
    throw std::invalid_argument("replaying the turns does not reproduce final_level");
  }
}

std::string serialize_sessions(const std::vector<Session>& sessions) {
  std::string out = json{{"schema", kSessionLogSchema}, {"version", kSessionLogVersion}}.dump();
  out += '\n';
  for (const auto& s : sessions) {
    out += session_to_json(s).dump();
    out += '\n';
  }
  return out;
}

std::string serialize_session_record(const Session& session) {
  return session_to_json(session).dump();
}

Session parse_session_record(const std::string& text) {
  return session_from_json(parse_line(text, 1), 1);
}

std::string serialize_turn_record(const Turn& turn) { return turn_to_json(turn).dump(); }

Turn parse_turn_record(const std::string& text) {
  RecordReader r(1);
  return turn_from_json(r, parse_line(text, 1));
}

std::vector<Session> parse_sessions(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<Session> sessions;
  std::set<std::string> ids;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaViolation(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!header_seen) {
      RecordReader r(line_no);
      r.exact_keys(j, {"schema", "version"});
      if (r.string(j, "schema") != kSessionLogSchema) r.fail("unexpected schema");
      if (r.integer(j, "version") != kSessionLogVersion) r.fail("unsupported version");
      header_seen = true;
      continue;
    }
    auto s = session_from_json(j, line_no);
    if (!ids.insert(s.session_id).second) {
      throw SchemaViolation(line_no, "duplicate session_id " + s.session_id);
    }
    sessions.push_back(std::move(s));
  }
  if (!header_seen) throw SchemaViolation(1, "missing schema header");
  return sessions;
}

void save_sessions(const std::vector<Session>& sessions, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << serialize_sessions(sessions);
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::vector<Session> load_sessions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sessions(buf.str());
}

Tensor3 additions_to_target(const ChangeSet& changes, int width, int height) {
  Tensor3 target(width, height, kActionTileCount);
  for (const auto& c : changes) {
    if (c.before == kEmpty && is_action_tile(c.after) && c.after != kEmpty) {
      target.at(c.x, c.y, c.after) = 1.0;
    }
  }
  return target;
}

std::vector<TrainingInstance> build_training_set(const std::vector<Session>& sessions) {
  std::vector<TrainingInstance> out;
  std::int64_t next_id = 0;
  for (const auto& s : sessions) {
    TileGrid level = s.initial;
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto& turn = s.turns[i];
      if (turn.actor == Actor::kAgent) {
        TrainingInstance inst;
        inst.instance_id = next_id++;
        inst.session_id = s.session_id;
        inst.turn_index = i;
        inst.state = to_state_tensor(level);
        inst.target_q = additions_to_target(turn.changes, level.width(), level.height());
        out.push_back(std::move(inst));
      }
      level = mrin::apply(level, turn.changes);
    }
  }
  if (out.empty()) throw NoAgentTurns();
  return out;
}

}  // namespace mrin
