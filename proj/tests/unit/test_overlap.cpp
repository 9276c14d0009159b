#include "builders.hpp"
#include "doctest.h"
#include "mrin/overlap.hpp"
#include "oracles.hpp"

using namespace mrin;

TEST_CASE("bottom row hand case") {
  auto level = build::rows({"----", "----", "----", "XXXX"});
  auto action = build::rows({"----", "----", "----", "XXX-"});
  auto r = local_overlap_ratio(level, action);
  CHECK(r.matched == 1);
  CHECK(r.action_patches == 2);
  CHECK(r.level_patches == 2);
  CHECK(r.ratio == 0.5);
}

TEST_CASE("identical grids") {
  auto g = build::rows({"--o--", "-SSS-", "XXXXX", "XXXXX"});
  auto r = local_overlap_ratio(g, g);
  CHECK(r.ratio == 1.0);
  CHECK(r.matched == r.action_patches);
}

TEST_CASE("disjoint content") {
  auto level = build::rows({"-----", "-----", "-----", "----X"});
  auto action = build::rows({"E----", "-----", "-----", "-----"});
  auto r = local_overlap_ratio(level, action);
  CHECK(r.matched == 0);
  CHECK(r.ratio == 0.0);
}

TEST_CASE("empty action") {
  auto level = build::rows({"---", "---", "XXX"});
  CHECK_THROWS_AS(local_overlap_ratio(level, TileGrid(3, 3)), EmptyAction);
  CHECK_THROWS_AS(local_overlap_ratio(level, ChangeSet{}), EmptyAction);
}

TEST_CASE("each level patch is consumed once") {
  auto level = build::rows({"----", "----", "----", "XXX-"});
  auto action = build::rows({"-------", "-------", "-------", "XXX-XXX"});
  auto r = local_overlap_ratio(level, action);
  CHECK(r.matched == oracle::sort_merge_overlap(level, action).matched);
  CHECK(r.ratio <= 1.0);
}

TEST_CASE("change set form") {
  auto level = build::rows({"----", "----", "----", "XXXX"});
  ChangeSet cs{{0, 3, kEmpty, kGround}, {1, 3, kEmpty, kGround}, {2, 3, kEmpty, kGround}};
  CHECK(local_overlap_ratio(level, cs).ratio == 0.5);
}

TEST_CASE("sort and merge oracle") {
  Rng rng(99);
  for (int k = 0; k < 500; ++k) {
    const int w = uniform_int(rng, 3, 9);
    const int h = uniform_int(rng, 3, 7);
    auto level = oracle::random_grid(rng, w, h, uniform_real(rng, 0.05, 0.6), uniform_int(rng, 1, 4));
    auto action = oracle::random_grid(rng, w, h, uniform_real(rng, 0.05, 0.6), uniform_int(rng, 1, 4));
    auto ref = oracle::sort_merge_overlap(level, action);
    if (ref.action_patches == 0) {
      CHECK_THROWS_AS(local_overlap_ratio(level, action), EmptyAction);
      continue;
    }
    auto r = local_overlap_ratio(level, action);
    CHECK(r.matched == ref.matched);
    CHECK(r.action_patches == ref.action_patches);
    CHECK(r.ratio == ref.ratio);
    CHECK(r.ratio >= 0.0);
    CHECK(r.ratio <= 1.0);
  }
}

TEST_CASE("translation invariance") {
  Rng rng(17);
  for (int k = 0; k < 50; ++k) {
    auto action = oracle::random_grid(rng, 5, 4, 0.4, 3);
    if (oracle::windows(action).empty()) continue;
    TileGrid level(12, 10);
    const int ox = uniform_int(rng, 0, 5);
    const int oy = uniform_int(rng, 0, 4);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) level.set(ox + x, oy + y, action.at(x, y));
    }
    TileGrid padded(12, 10);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 5; ++x) padded.set(x, y, action.at(x, y));
    }
    CHECK(local_overlap_ratio(level, padded).ratio == 1.0);
  }
}
