#include <map>
#include <set>

#include "mrin/evalharness.hpp"

namespace mrin {
namespace {

bool removes(const Turn& t, const Placement& p) {
  for (const auto& c : t.changes) {
    if (c.x == p.x && c.y == p.y && c.before == p.tile) return true;
  }
  return false;
}

bool places(const Turn& t, const Placement& p) {
  for (const auto& c : t.changes) {
    if (c.x == p.x && c.y == p.y && c.after == p.tile) return true;
  }
  return false;
}

}  // namespace

const char* label_kind_name(LabelKind k) {
  return k == LabelKind::kFalsePositive ? "FALSE_POSITIVE" : "FALSE_NEGATIVE";
}

IcdStates build_icd(const Session& session, const LabelErrorExample& ex) {
  const auto n = session.turns.size();
  if (ex.session_id != session.session_id) {
    throw InconsistentExample("example belongs to session " + ex.session_id);
  }
  if (ex.intro_turn >= n || ex.contradiction_turn >= n || ex.contradiction_turn <= ex.intro_turn) {
    throw InconsistentExample("example turns out of order or out of range");
  }
  const auto& intro = session.turns[ex.intro_turn];
  if (intro.actor != Actor::kAgent || !places(intro, ex.addition)) {
    throw InconsistentExample("introducing turn is not an AGENT addition of the example tile");
  }
  const auto& contra = session.turns[ex.contradiction_turn];
  const bool ok = ex.kind == LabelKind::kFalsePositive ? removes(contra, ex.addition)
                                                       : places(contra, ex.addition);
  if (!ok) throw InconsistentExample("contradiction turn does not contain the contradicting edit");
  IcdStates s;
  s.i_state = level_before_turn(session, ex.intro_turn);
  s.c_state = level_before_turn(session, ex.contradiction_turn + 1);
  s.d_state = diff(s.i_state, s.c_state);
  return s;
}

std::vector<LabelErrorExample> detect_label_errors(const Session& session) {
  std::vector<LabelErrorExample> out;
  std::map<Placement, std::size_t> introduced_by;  // latest AGENT turn adding it
  std::set<std::pair<std::size_t, Placement>> judged;
  const auto& final_level = session.final_level;

  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const auto& turn = session.turns[i];
    if (turn.actor == Actor::kAgent) {
      for (const auto& c : turn.changes) {
        if (c.after != kEmpty) introduced_by[{c.x, c.y, c.after}] = i;
      }
      continue;
    }
    for (const auto& d : turn.decisions) {
      auto it = introduced_by.find(d.target);
      if (it == introduced_by.end()) continue;
      if (!judged.insert({it->second, d.target}).second) continue;
      const bool present = final_level.in_bounds(d.target.x, d.target.y) &&
                           final_level.at(d.target.x, d.target.y) == d.target.tile;
      LabelErrorExample ex;
      if (d.verdict == Verdict::kKeep && !present) {
        ex.kind = LabelKind::kFalsePositive;
      } else if (d.verdict == Verdict::kDelete && present) {
        ex.kind = LabelKind::kFalseNegative;
      } else {
        continue;
      }
      ex.session_id = session.session_id;
      ex.addition = d.target;
      ex.intro_turn = it->second;
      ex.decision_turn = i;
      for (std::size_t j = i + 1; j < session.turns.size(); ++j) {
        const auto& t = session.turns[j];
        if (ex.kind == LabelKind::kFalsePositive ? removes(t, d.target) : places(t, d.target)) {
          ex.contradiction_turn = j;
          ex.consistent = true;
          break;
        }
      }
      if (ex.consistent) {
        try {
          auto s = build_icd(session, ex);
          ex.i_state = std::move(s.i_state);
          ex.c_state = std::move(s.c_state);
          ex.d_state = std::move(s.d_state);
        } catch (const InconsistentExample&) {
          ex.consistent = false;
        }
      }
      out.push_back(std::move(ex));
    }
  }
  return out;
}

}  // namespace mrin
