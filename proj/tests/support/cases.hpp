// Handwritten sessions shared by the unit and acceptance suites.
#pragma once

#include "builders.hpp"

namespace cases {

using namespace mrin;
using build::drop;
using build::keep;

inline TileId tile(const char* name) { return *Legend::standard().tile_for_name(name); }

inline TileGrid ground_level() { return build::rows({"------", "------", "------", "------", "XXXXXX"}); }

// Two kept additions later removed (false positives), one deleted addition
// later restored (false negative) and one correct keep.
inline Session two_fp_one_fn() {
  const TileId goomba = tile("GOOMBA"), coin = tile("COIN"), brick = tile("BRICK");
  build::SessionScript s("hand", ground_level());
  s.agent({{1, 3, goomba}, {2, 1, coin}, {4, 1, brick}, {3, 1, coin}});
  s.human({{4, 1, kEmpty}}, {keep(1, 3, goomba), keep(2, 1, coin), drop(4, 1, brick), keep(3, 1, coin)});
  s.human({{2, 1, kEmpty}});
  s.human({{4, 1, brick}, {0, 2, kGround}});
  s.agent({{5, 3, tile("KOOPA")}});
  s.human({{1, 3, kEmpty}});
  return s.session();
}

struct ExpectedExample {
  LabelKind kind;
  Placement addition;
  std::size_t intro_turn;
  std::size_t decision_turn;
  std::size_t contradiction_turn;
};

inline std::vector<ExpectedExample> two_fp_one_fn_expected() {
  return {{LabelKind::kFalsePositive, {1, 3, tile("GOOMBA")}, 0, 1, 5},
          {LabelKind::kFalsePositive, {2, 1, tile("COIN")}, 0, 1, 2},
          {LabelKind::kFalseNegative, {4, 1, tile("BRICK")}, 0, 1, 3}};
}

// A kept coin removed three turns later with interleaved human and agent edits.
inline Session multi_turn_gap() {
  const TileId coin = tile("COIN"), brick = tile("BRICK");
  build::SessionScript s("gap", ground_level());
  s.human({{0, 0, brick}});
  s.agent({{2, 1, coin}, {3, 1, coin}, {4, 1, coin}});
  s.human({{5, 0, brick}}, {keep(3, 1, coin)});
  s.agent({{1, 2, brick}});
  s.human({{0, 0, kEmpty}, {2, 2, brick}});
  s.human({{3, 1, kEmpty}, {4, 1, brick}});
  s.agent({{5, 2, coin}});
  return s.session();
}

// The agent's only addition is kept and then removed: I and C coincide.
inline Session degenerate(int width, int height) {
  const TileId coin = tile("COIN");
  build::SessionScript s("degenerate", TileGrid(width, height));
  s.agent({{2, 1, coin}});
  s.human({}, {keep(2, 1, coin)});
  s.human({{2, 1, kEmpty}});
  return s.session();
}

}  // namespace cases
