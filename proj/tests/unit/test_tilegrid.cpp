#include <filesystem>

#include "doctest.h"
#include "mrin/tilegrid.hpp"
#include "oracles.hpp"

using namespace mrin;

namespace {

TileId tile(const char* name) { return *Legend::standard().tile_for_name(name); }

}  // namespace

TEST_CASE("legend table") {
  const auto& L = Legend::standard();
  CHECK(L.entries().size() == 34);
  CHECK(L.name(kEmpty) == "EMPTY");
  CHECK(L.name(kGround) == "GROUND");
  CHECK(L.name(kPlayer) == "PLAYER");
  CHECK(L.name(kFlag) == "FLAG");
  CHECK(L.tile_for_glyph('-') == kEmpty);
  CHECK_FALSE(L.tile_for_glyph('~').has_value());
  CHECK(Legend::parse(L.render()) == L);
}

TEST_CASE("legend file matches the built-in table") {
  const auto path = std::filesystem::path(MRIN_DATA_DIR) / "tiles.legend";
  CHECK(Legend::load(path) == Legend::standard());
}

TEST_CASE("legend rejects duplicates and gaps") {
  CHECK_THROWS_AS(Legend::parse("id=0 name=EMPTY glyph=-\nid=0 name=X glyph=X\n"), LegendError);
  CHECK_THROWS_AS(Legend::parse("id=0 name=EMPTY glyph=-\n"), LegendError);
}

TEST_CASE("parse three line level") {
  auto g = parse_text_level("---\n---\nXXX\n");
  CHECK(g.width() == 3);
  CHECK(g.height() == 3);
  for (int x = 0; x < 3; ++x) {
    CHECK(g.at(x, 0) == kEmpty);
    CHECK(g.at(x, 1) == kEmpty);
    CHECK(g.at(x, 2) == kGround);
  }
  CHECK(render_text_level(g) == "---\n---\nXXX\n");
}

TEST_CASE("ragged lines report the offending line") {
  try {
    parse_text_level("----\n---\n----\n");
    FAIL("expected RaggedLines");
  } catch (const RaggedLines& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("unknown glyph reports position") {
  try {
    parse_text_level("---\n-~-\n---\n");
    FAIL("expected UnknownGlyph");
  } catch (const UnknownGlyph& e) {
    CHECK(e.glyph == '~');
    CHECK(e.line == 2);
    CHECK(e.col == 2);
  }
}

TEST_CASE("grids smaller than a patch are rejected") {
  CHECK_THROWS_AS(parse_text_level("--\n--\n"), GridTooSmall);
  CHECK_THROWS_AS(TileGrid(2, 5), GridTooSmall);
}

TEST_CASE("40x15 round trip and state shape") {
  Rng rng(11);
  for (int k = 0; k < 20; ++k) {
    auto g = oracle::random_grid(rng, 40, 15, 0.4, kStateTileCount - 1);
    const auto text = render_text_level(g);
    CHECK(parse_text_level(text) == g);
    CHECK(render_text_level(parse_text_level(text)) == text);
    auto t = to_state_tensor(g);
    CHECK(t.width == 40);
    CHECK(t.height == 15);
    CHECK(t.channels == 34);
  }
}

TEST_CASE("one-hot encoding") {
  SUBCASE("all empty") {
    auto t = to_state_tensor(TileGrid(3, 3));
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        CHECK(t.at(x, y, 0) == 1.0);
        for (int c = 1; c < 34; ++c) CHECK(t.at(x, y, c) == 0.0);
      }
    }
  }
  SUBCASE("mass") {
    TileGrid g(5, 4);
    g.set(0, 0, kGround);
    double sum = 0.0;
    for (double v : to_state_tensor(g).data) sum += v;
    CHECK(sum == 20.0);
  }
  SUBCASE("argmax inverts the encoding") {
    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
      auto g = oracle::random_grid(rng, 5, 4, 0.6, 33);
      auto t = to_state_tensor(g);
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) {
          int best = 0;
          for (int c = 1; c < 34; ++c) {
            if (t.at(x, y, c) > t.at(x, y, best)) best = c;
          }
          CHECK(best == g.at(x, y));
        }
      }
    }
  }
}

TEST_CASE("patch extraction") {
  CHECK(extract_patches(TileGrid(4, 4)).empty());

  TileGrid bottom(4, 4);
  for (int x = 0; x < 4; ++x) bottom.set(x, 3, kGround);
  auto p = extract_patches(bottom);
  REQUIRE(p.size() == 2);
  const Patch3 expected{0, 0, 0, 0, 0, 0, kGround, kGround, kGround};
  CHECK(p[0] == expected);
  CHECK(p[1] == expected);

  TileGrid one(3, 3);
  one.set(1, 1, tile("COIN"));
  CHECK(extract_patches(one).size() == 1);

  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    auto g = oracle::random_grid(rng, 7, 6, 0.15, 31);
    auto lib = extract_patches(g);
    auto ref = oracle::windows(g);
    REQUIRE(lib.size() == ref.size());
    for (std::size_t i = 0; i < lib.size(); ++i) {
      CHECK(std::vector<int>(lib[i].begin(), lib[i].end()) == ref[i]);
    }
  }
}

TEST_CASE("diff and apply") {
  TileGrid a(4, 4);
  CHECK(diff(a, a).empty());

  TileGrid b = a;
  b.set(1, 2, kGround);
  CHECK(diff(a, b) == ChangeSet{{1, 2, kEmpty, kGround}});

  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    auto x = oracle::random_grid(rng, 6, 5, 0.5, 33);
    auto y = oracle::random_grid(rng, 6, 5, 0.5, 33);
    CHECK(mrin::apply(x, diff(x, y)) == y);
  }

  CHECK_THROWS_AS(diff(TileGrid(3, 3), TileGrid(4, 3)), DimensionMismatch);
  CHECK_THROWS_AS(mrin::apply(a, {{1, 1, kGround, kEmpty}}), StaleChange);
  CHECK_THROWS_AS(mrin::apply(a, {{9, 1, kEmpty, kGround}}), OutOfRange);
  CHECK_THROWS_AS(validate_changeset({{1, 1, kEmpty, kEmpty}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_changeset({{1, 1, kEmpty, 1}, {1, 1, kEmpty, 2}}), std::invalid_argument);
}

TEST_CASE("changeset to grid") {
  CHECK(changeset_to_grid({}, 4, 4) == TileGrid(4, 4));

  auto g = changeset_to_grid({{5, 3, kEmpty, tile("GOOMBA")}}, 40, 15);
  CHECK(g.count_non_empty() == 1);
  CHECK(g.at(5, 3) == tile("GOOMBA"));

  Rng rng(21);
  for (int k = 0; k < 100; ++k) {
    auto target = oracle::random_grid(rng, 8, 6, 0.3, 31);
    ChangeSet cs;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 8; ++x) {
        if (target.at(x, y) != kEmpty) cs.push_back({x, y, kEmpty, target.at(x, y)});
      }
    }
    CHECK(diff(TileGrid(8, 6), changeset_to_grid(cs, 8, 6)) == cs);
    CHECK(count_additions(cs) == target.count_non_empty());
  }
}

TEST_CASE("glyph rows") {
  const std::vector<std::string> rows{"--o-", "-<>-", "X[]X"};
  auto g = from_glyph_rows(rows);
  CHECK(g.at(2, 0) == tile("COIN"));
  CHECK(g.at(1, 1) == tile("PIPE_TOP_LEFT"));
  CHECK(to_glyph_rows(g) == rows);
  CHECK(g.is_action_grid());
  g.set(0, 0, kPlayer);
  CHECK_FALSE(g.is_action_grid());
}
