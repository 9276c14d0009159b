// Scripted co-creation sessions standing in for recorded study data.
//
// Each session has a dominant motif: a structure family plus a tile variant.
// Human turns judge each agent addition; labeling errors are injected at the
// configured rates. A judged cell is touched again only by its scheduled
// contradiction: kept cells are locked, deleted cells are blocked.

#include <algorithm>
#include <map>
#include <set>

#include "mrin/random.hpp"
#include "mrin/sessionlog.hpp"

namespace mrin {
namespace {

constexpr TileId kBrick = 2;
constexpr TileId kQuestion = 3;
constexpr TileId kQuestionMushroom = 4;
constexpr TileId kUsedBlock = 5;
constexpr TileId kSolidBlock = 6;
constexpr TileId kPipeTopLeft = 7;
constexpr TileId kPipeTopRight = 8;
constexpr TileId kPipeLeft = 9;
constexpr TileId kPipeRight = 10;
constexpr TileId kCoin = 11;
constexpr TileId kGoomba = 12;
constexpr TileId kKoopa = 13;
constexpr TileId kKoopaRed = 14;
constexpr TileId kSpiny = 15;
constexpr TileId kPiranha = 16;
constexpr TileId kBulletTop = 17;
constexpr TileId kBulletBase = 18;
constexpr TileId kMushroom = 19;
constexpr TileId kFireFlower = 20;
constexpr TileId kStar = 21;
constexpr TileId kOneUp = 22;
constexpr TileId kTreeTop = 23;
constexpr TileId kTreeTrunk = 24;
constexpr TileId kPlatform = 25;
constexpr TileId kCloud = 26;
constexpr TileId kHill = 27;
constexpr TileId kBush = 28;
constexpr TileId kHammerBro = 29;
constexpr TileId kLakitu = 30;
constexpr TileId kBeetle = 31;

using Cells = std::vector<Placement>;

struct Style {
  Motif motif;
  int variant;
};

int variant_count(Motif m) {
  switch (m) {
    case Motif::kPipeField: return 3;
    case Motif::kGoombaRow: return 6;
    case Motif::kStaircase: return 4;
    case Motif::kFloatingBlocks: return 4;
    case Motif::kCoinArc: return 3;
    case Motif::kTreeGrove: return 3;
  }
  return 1;
}

// One structure of the given style anchored at column x. Row h-1 is ground;
// structures rest on row h-2 or float above it.
Cells structure(const Style& style, int x, int w, int h, Rng& rng) {
  Cells out;
  auto put = [&](int cx, int cy, TileId t) {
    if (cx >= 0 && cx < w && cy >= 0 && cy < h - 1) out.push_back({cx, cy, t});
  };
  const int floor = h - 2;
  const int v = style.variant;
  switch (style.motif) {
    case Motif::kPipeField: {
      int height = 2 + v % 2 + uniform_int(rng, 0, 1);
      int top = floor - height + 1;
      put(x, top, kPipeTopLeft);
      put(x + 1, top, kPipeTopRight);
      for (int y = top + 1; y <= floor; ++y) {
        put(x, y, kPipeLeft);
        put(x + 1, y, kPipeRight);
      }
      if (v == 2) put(x, top - 1, kPiranha);
      break;
    }
    case Motif::kGoombaRow: {
      static constexpr TileId enemies[] = {kGoomba, kKoopa, kKoopaRed, kSpiny, kBeetle, kHammerBro};
      TileId enemy = enemies[v % 6];
      int len = uniform_int(rng, 3, 4);
      bool raised = uniform01(rng) < 0.5;
      int row = raised ? floor - 2 : floor;
      for (int i = 0; i < len; ++i) {
        if (raised) put(x + i, row + 1, kBrick);
        if (i % 2 == 0 || len == 3) put(x + i, row, enemy);
      }
      break;
    }
    case Motif::kStaircase: {
      static constexpr TileId blocks[] = {kSolidBlock, kUsedBlock, kBrick, kSolidBlock};
      TileId block = blocks[v % 4];
      int steps = uniform_int(rng, 3, 4);
      bool descending = uniform01(rng) < 0.3;
      for (int i = 0; i < steps; ++i) {
        int colh = descending ? steps - i : i + 1;
        for (int k = 0; k < colh; ++k) put(x + i, floor - k, block);
      }
      if (v == 3) {
        put(x + steps, floor, kBulletBase);
        put(x + steps, floor - 1, kBulletTop);
      }
      break;
    }
    case Motif::kFloatingBlocks: {
      static constexpr TileId items[] = {kMushroom, kFireFlower, kStar, kOneUp};
      int len = uniform_int(rng, 3, 5);
      int row = floor - 3;
      for (int i = 0; i < len; ++i) {
        TileId t = (i % 2 == 1) ? (v % 2 == 0 ? kQuestion : kQuestionMushroom) : kBrick;
        put(x + i, row, t);
      }
      put(x + len / 2, row - 1, items[v % 4]);
      break;
    }
    case Motif::kCoinArc: {
      int len = uniform_int(rng, 4, 5);
      int base = floor - 2;
      for (int i = 0; i < len; ++i) {
        int lift = (i == 0 || i == len - 1) ? 0 : 1;
        put(x + i, base - lift, kCoin);
      }
      if (v == 1) {
        for (int i = 1; i < len - 1; ++i) put(x + i, base + 1, kPlatform);
      }
      put(x + 1, 0, v == 2 ? kLakitu : kCloud);
      put(x + 2, 0, kCloud);
      break;
    }
    case Motif::kTreeGrove: {
      int height = uniform_int(rng, 2, 3);
      int top = floor - height;
      put(x, top, kTreeTop);
      put(x + 1, top, kTreeTop);
      for (int y = top + 1; y <= floor; ++y) put(x, y, kTreeTrunk);
      TileId decor = v == 0 ? kBush : (v == 1 ? kHill : kBush);
      put(x + 2, floor, decor);
      if (v == 2) put(x + 3, floor, kHill);
      break;
    }
  }
  return out;
}

class SessionBuilder {
 public:
  SessionBuilder(std::string id, const Style& style, const SyntheticParams& p, Rng& rng)
      : style_(style), p_(p), rng_(rng) {
    session_.session_id = std::move(id);
    TileGrid level(p.width, p.height);
    for (int x = 0; x < p.width; ++x) level.set(x, p.height - 1, kGround);
    level.set(0, p.height - 2, kPlayer);
    level.set(p.width - 1, p.height - 2, kFlag);
    session_.initial = level;
    level_ = level;
    for (int x = 0; x < p.width; ++x) locked_.insert({x, p.height - 1});
    locked_.insert({0, p.height - 2});
    locked_.insert({p.width - 1, p.height - 2});
  }

  void human_opening() {
    Turn t;
    t.actor = Actor::kHuman;
    add_structure_tiles(t.changes, uniform_int(rng_, 2, 4), /*lock=*/true);
    commit(std::move(t));
  }

  // Returns the placements the agent added.
  Cells agent_turn() {
    Turn t;
    t.actor = Actor::kAgent;
    int n = uniform_int(rng_, p_.min_agent_additions, p_.max_agent_additions);
    add_structure_tiles(t.changes, n, /*lock=*/false);
    Cells added;
    for (const auto& c : t.changes) added.push_back({c.x, c.y, c.after});
    commit(std::move(t));
    return added;
  }

  // Judges every addition from the preceding agent turn. `force_fp` /
  // `force_fn` convert the first eligible decision when the corpus would
  // otherwise lack that error kind.
  void human_judge(const Cells& added, std::size_t intro_turn, bool& force_fp, bool& force_fn,
                   std::vector<InjectedError>& injected) {
    Turn t;
    t.actor = Actor::kHuman;
    const std::size_t this_turn = session_.turns.size();
    execute_due(t.changes, this_turn, injected);
    for (const auto& a : added) {
      Decision d;
      d.target = a;
      double u = uniform01(rng_);
      LabelKind kind{};
      bool error = false;
      if (force_fn) {
        kind = LabelKind::kFalseNegative;
        error = true;
        force_fn = false;
      } else if (force_fp) {
        kind = LabelKind::kFalsePositive;
        error = true;
        force_fp = false;
      } else if (u < p_.fn_rate) {
        kind = LabelKind::kFalseNegative;
        error = true;
      } else if (u < p_.fn_rate + p_.fp_rate) {
        kind = LabelKind::kFalsePositive;
        error = true;
      }
      if (error) {
        d.verdict = kind == LabelKind::kFalsePositive ? Verdict::kKeep : Verdict::kDelete;
        Pending pend;
        pend.error = {kind, session_.session_id, a, intro_turn, this_turn, 0};
        pend.due_after = this_turn + 2 * static_cast<std::size_t>(uniform_int(rng_, 1, 2));
        pending_.push_back(pend);
      } else {
        d.verdict = uniform01(rng_) < 0.8 ? Verdict::kKeep : Verdict::kDelete;
      }
      if (d.verdict == Verdict::kDelete) {
        t.changes.push_back({a.x, a.y, a.tile, kEmpty});
        blocked_.insert({a.x, a.y});
      } else {
        locked_.insert({a.x, a.y});
      }
      t.decisions.push_back(d);
    }
    add_structure_tiles(t.changes, uniform_int(rng_, 1, 3), /*lock=*/true);
    commit(std::move(t));
  }

  void flush_pending(std::vector<InjectedError>& injected) {
    while (!pending_.empty()) {
      Turn t;
      t.actor = Actor::kHuman;
      const std::size_t this_turn = session_.turns.size();
      for (auto& p : pending_) p.due_after = std::min(p.due_after, this_turn);
      execute_due(t.changes, this_turn, injected);
      commit(std::move(t));
    }
  }

  Session finish() {
    session_.final_level = level_;
    return std::move(session_);
  }

  std::size_t turn_count() const { return session_.turns.size(); }

 private:
  struct Pending {
    InjectedError error;
    std::size_t due_after = 0;
  };

  bool free_cell(int x, int y) const {
    return level_.at(x, y) == kEmpty && !blocked_.contains({x, y}) && !locked_.contains({x, y});
  }

  // Places up to `n` tiles taken from whole structures of the session style.
  void add_structure_tiles(ChangeSet& changes, int n, bool lock) {
    std::set<std::pair<int, int>> taken;
    for (const auto& c : changes) taken.insert({c.x, c.y});
    int placed = 0;
    for (int attempt = 0; attempt < 40 && placed < n; ++attempt) {
      int x = uniform_int(rng_, 0, p_.width - 1);
      for (const auto& cell : structure(style_, x, p_.width, p_.height, rng_)) {
        if (placed >= n) break;
        if (!free_cell(cell.x, cell.y) || taken.contains({cell.x, cell.y})) continue;
        changes.push_back({cell.x, cell.y, kEmpty, cell.tile});
        taken.insert({cell.x, cell.y});
        if (lock) locked_.insert({cell.x, cell.y});
        ++placed;
      }
    }
  }

  void execute_due(ChangeSet& changes, std::size_t this_turn, std::vector<InjectedError>& injected) {
    std::vector<Pending> keep;
    for (auto& p : pending_) {
      if (p.due_after > this_turn) {
        keep.push_back(p);
        continue;
      }
      const auto& a = p.error.addition;
      if (p.error.kind == LabelKind::kFalsePositive) {
        changes.push_back({a.x, a.y, a.tile, kEmpty});
        locked_.erase({a.x, a.y});
        blocked_.insert({a.x, a.y});
      } else {
        changes.push_back({a.x, a.y, kEmpty, a.tile});
        blocked_.erase({a.x, a.y});
        locked_.insert({a.x, a.y});
      }
      p.error.contradiction_turn = this_turn;
      injected.push_back(p.error);
    }
    pending_ = std::move(keep);
  }

  void commit(Turn t) {
    level_ = mrin::apply(level_, t.changes);
    session_.turns.push_back(std::move(t));
  }

  Style style_;
  const SyntheticParams& p_;
  Rng& rng_;
  Session session_;
  TileGrid level_;
  std::set<std::pair<int, int>> locked_;
  std::set<std::pair<int, int>> blocked_;
  std::vector<Pending> pending_;
};

void check_params(const SyntheticParams& p) {
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(p.fp_rate) || !rate_ok(p.fn_rate) || p.fp_rate + p.fn_rate > 1.0) {
    throw BadParams("fp_rate and fn_rate must lie in [0,1] and sum to at most 1");
  }
  if (p.n_sessions < 1) throw BadParams("n_sessions must be positive");
  if (p.width < 6 || p.height < 6) throw BadParams("synthetic levels need at least 6x6 tiles");
  if (p.motif_palette.empty()) throw BadParams("motif_palette is empty");
  if (p.agent_turns < 1) throw BadParams("agent_turns must be positive");
  if (p.min_agent_additions < 1 || p.min_agent_additions > p.max_agent_additions) {
    throw BadParams("bad agent addition range");
  }
  if (p.id_prefix.empty()) throw BadParams("id_prefix is empty");
}

}  // namespace

const char* motif_name(Motif m) {
  switch (m) {
    case Motif::kPipeField: return "pipe_field";
    case Motif::kGoombaRow: return "goomba_row";
    case Motif::kStaircase: return "staircase";
    case Motif::kFloatingBlocks: return "floating_blocks";
    case Motif::kCoinArc: return "coin_arc";
    case Motif::kTreeGrove: return "tree_grove";
  }
  return "unknown";
}

std::vector<Motif> all_motifs() {
  return {Motif::kPipeField,      Motif::kGoombaRow, Motif::kStaircase,
          Motif::kFloatingBlocks, Motif::kCoinArc,   Motif::kTreeGrove};
}

SyntheticCorpus gen_synthetic(std::uint64_t seed, const SyntheticParams& params) {
  check_params(params);
  Rng rng(seed);
  SyntheticCorpus corpus;
  const bool want_fp = params.fp_rate > 0.0;
  const bool want_fn = params.fn_rate > 0.0;
  const int palette = static_cast<int>(params.motif_palette.size());

  for (int i = 0; i < params.n_sessions; ++i) {
    Motif motif = params.motif_palette[i % palette];
    Style style{motif, (i / palette) % variant_count(motif)};
    SessionBuilder b(params.id_prefix + std::to_string(i), style, params, rng);
    const bool last = i + 1 == params.n_sessions;
    auto has_kind = [&](LabelKind k) {
      return std::any_of(corpus.injected.begin(), corpus.injected.end(),
                         [&](const InjectedError& e) { return e.kind == k; });
    };
    std::vector<InjectedError> session_errors;
    b.human_opening();
    for (int k = 0; k < params.agent_turns; ++k) {
      std::size_t intro = b.turn_count();
      Cells added = b.agent_turn();
      bool pending_fp = false;
      bool pending_fn = false;
      // In the final session make sure each requested error kind occurs.
      if (last && k == 0) {
        pending_fp = want_fp && !has_kind(LabelKind::kFalsePositive);
        pending_fn = want_fn && !has_kind(LabelKind::kFalseNegative);
      }
      b.human_judge(added, intro, pending_fp, pending_fn, session_errors);
    }
    b.flush_pending(session_errors);
    corpus.injected.insert(corpus.injected.end(), session_errors.begin(), session_errors.end());
    corpus.sessions.push_back(b.finish());
    corpus.session_motifs.push_back(motif);
  }
  return corpus;
}

}  // namespace mrin
