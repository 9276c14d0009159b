// Small helpers for writing sessions by hand.
#pragma once

#include <string>
#include <vector>

#include "mrin/sessionlog.hpp"
#include "mrin/tilegrid.hpp"

namespace build {

using namespace mrin;

struct Put {
  int x;
  int y;
  TileId tile;  // kEmpty removes
};

class SessionScript {
 public:
  SessionScript(std::string id, TileGrid initial) {
    s_.session_id = std::move(id);
    s_.initial = initial;
    s_.final_level = std::move(initial);
  }

  SessionScript& agent(const std::vector<Put>& puts) { return turn(Actor::kAgent, puts, {}); }

  SessionScript& human(const std::vector<Put>& puts, const std::vector<Decision>& decisions = {}) {
    return turn(Actor::kHuman, puts, decisions);
  }

  std::size_t turns() const { return s_.turns.size(); }
  const Session& session() const { return s_; }

 private:
  SessionScript& turn(Actor actor, const std::vector<Put>& puts, const std::vector<Decision>& ds) {
    Turn t;
    t.actor = actor;
    for (const auto& p : puts) {
      t.changes.push_back({p.x, p.y, s_.final_level.at(p.x, p.y), p.tile});
    }
    t.decisions = ds;
    s_.final_level = mrin::apply(s_.final_level, t.changes);
    s_.turns.push_back(std::move(t));
    return *this;
  }

  Session s_;
};

inline Decision keep(int x, int y, TileId t) { return {{x, y, t}, Verdict::kKeep}; }
inline Decision drop(int x, int y, TileId t) { return {{x, y, t}, Verdict::kDelete}; }

inline TileGrid rows(const std::vector<std::string>& r) { return from_glyph_rows(r); }

}  // namespace build
