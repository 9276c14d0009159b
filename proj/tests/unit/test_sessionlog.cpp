#include <filesystem>

#include "builders.hpp"
#include "doctest.h"
#include "mrin/sessionlog.hpp"

using namespace mrin;
using build::Put;

namespace {

TileId tile(const char* name) { return *Legend::standard().tile_for_name(name); }

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mrin_test_sessionlog";
  std::filesystem::create_directories(dir);
  return dir / name;
}

Session three_turn_session() {
  build::SessionScript s("demo", build::rows({"------", "------", "------", "XXXXXX"}));
  s.agent({{1, 2, tile("GOOMBA")}, {3, 1, tile("COIN")}});
  s.human({{3, 1, kEmpty}}, {build::keep(1, 2, tile("GOOMBA")), build::drop(3, 1, tile("COIN"))});
  s.agent({{4, 2, tile("BRICK")}});
  return s.session();
}

}  // namespace

TEST_CASE("empty corpus round trip") {
  const auto path = temp_file("empty.jsonl");
  save_sessions({}, path);
  CHECK(load_sessions(path).empty());
}

TEST_CASE("three turn session round trip") {
  const auto s = three_turn_session();
  validate_session(s);
  const auto path = temp_file("one.jsonl");
  save_sessions({s}, path);
  auto back = load_sessions(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == s);
  CHECK(serialize_sessions(back) == serialize_sessions({s}));
}

TEST_CASE("single records") {
  const auto s = three_turn_session();
  CHECK(parse_session_record(serialize_session_record(s)) == s);
  CHECK(parse_turn_record(serialize_turn_record(s.turns[1])) == s.turns[1]);
  CHECK_THROWS_AS(parse_turn_record("{\"actor\":\"ROBOT\",\"changes\":[],\"decisions\":[]}"),
                  SchemaViolation);
}

TEST_CASE("generated corpus round trip") {
  SyntheticParams p;
  p.n_sessions = 50;
  p.fp_rate = 0.1;
  p.fn_rate = 0.1;
  auto corpus = gen_synthetic(4, p);
  REQUIRE(corpus.sessions.size() == 50);
  auto back = parse_sessions(serialize_sessions(corpus.sessions));
  REQUIRE(back.size() == corpus.sessions.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = back[i];
    const auto& b = corpus.sessions[i];
    CHECK(a.session_id == b.session_id);
    CHECK(a.initial == b.initial);
    CHECK(a.final_level == b.final_level);
    REQUIRE(a.turns.size() == b.turns.size());
    for (std::size_t t = 0; t < a.turns.size(); ++t) {
      CHECK(a.turns[t].actor == b.turns[t].actor);
      CHECK(a.turns[t].changes == b.turns[t].changes);
      CHECK(a.turns[t].decisions == b.turns[t].decisions);
    }
    validate_session(a);
  }
}

TEST_CASE("malformed logs") {
  const auto good = serialize_sessions({three_turn_session()});
  const auto header = good.substr(0, good.find('\n') + 1);
  CHECK_THROWS_AS(parse_sessions("{\"session_id\":\"x\"}\n"), SchemaViolation);
  try {
    parse_sessions(header + "not json\n");
    FAIL("expected SchemaViolation");
  } catch (const SchemaViolation& e) {
    CHECK(e.line == 2);
  }
  const auto body = good.substr(header.size());
  CHECK_THROWS_AS(parse_sessions(header + body + body), SchemaViolation);
  CHECK_THROWS_AS(load_sessions(temp_file("missing_does_not_exist.jsonl")), IoFailure);
}

TEST_CASE("session invariants") {
  auto s = three_turn_session();
  SUBCASE("decision on a human addition") {
    build::SessionScript b("bad", TileGrid(4, 4));
    b.human({{1, 1, kGround}});
    b.human({}, {build::keep(1, 1, kGround)});
    CHECK_THROWS(validate_session(b.session()));
  }
  SUBCASE("agent with decisions") {
    s.turns[0].decisions.push_back(build::keep(1, 2, tile("GOOMBA")));
    CHECK_THROWS(validate_session(s));
  }
  SUBCASE("final level mismatch") {
    s.final_level.set(0, 0, kGround);
    CHECK_THROWS(validate_session(s));
  }
  SUBCASE("agent placing PLAYER") {
    build::SessionScript b("bad", TileGrid(4, 4));
    b.agent({{1, 1, kPlayer}});
    CHECK_THROWS(validate_session(b.session()));
  }
}

TEST_CASE("level before turn") {
  const auto s = three_turn_session();
  CHECK(level_before_turn(s, 0) == s.initial);
  CHECK(level_before_turn(s, 3) == s.final_level);
  CHECK(level_before_turn(s, 1).at(1, 2) == tile("GOOMBA"));
  CHECK(replay(s) == s.final_level);
  CHECK_THROWS(level_before_turn(s, 4));
}

TEST_CASE("training set") {
  SUBCASE("one agent turn with two additions") {
    build::SessionScript b("a", TileGrid(5, 4));
    b.agent({{0, 3, kGround}, {1, 3, kGround}});
    auto set = build_training_set({b.session()});
    REQUIRE(set.size() == 1);
    double mass = 0.0;
    for (double v : set[0].target_q.data) mass += v;
    CHECK(mass == 2.0);
    CHECK(set[0].target_q.at(1, 3, kGround) == 1.0);
    CHECK(set[0].state.channels == 34);
    CHECK(set[0].target_q.channels == 32);
    CHECK(set[0].state.at(0, 3, kEmpty) == 1.0);
  }
  SUBCASE("no agent turns") {
    build::SessionScript b("h", TileGrid(4, 4));
    b.human({{1, 1, kGround}});
    CHECK_THROWS_AS(build_training_set({b.session()}), NoAgentTurns);
  }
  SUBCASE("dense ids over a corpus") {
    SyntheticParams p;
    p.n_sessions = 10;
    auto corpus = gen_synthetic(2, p);
    std::size_t agent_turns = 0;
    for (const auto& s : corpus.sessions) {
      for (const auto& t : s.turns) agent_turns += t.actor == Actor::kAgent;
    }
    auto set = build_training_set(corpus.sessions);
    REQUIRE(set.size() == agent_turns);
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(set[i].instance_id == static_cast<std::int64_t>(i));
  }
  SUBCASE("removals are not targets") {
    build::SessionScript b("r", build::rows({"----", "----", "----", "XXXX"}));
    b.agent({{0, 3, kEmpty}, {2, 1, kGround}});
    auto t = build_training_set({b.session()})[0].target_q;
    double mass = 0.0;
    for (double v : t.data) mass += v;
    CHECK(mass == 1.0);
  }
}

TEST_CASE("generator") {
  SyntheticParams p;
  p.fp_rate = 0.2;
  p.fn_rate = 0.1;
  auto a = gen_synthetic(7, p);
  auto b = gen_synthetic(7, p);
  CHECK(serialize_sessions(a.sessions) == serialize_sessions(b.sessions));
  CHECK(a.injected == b.injected);
  CHECK(serialize_sessions(gen_synthetic(8, p).sessions) != serialize_sessions(a.sessions));
  for (const auto& s : a.sessions) validate_session(s);

  SyntheticParams clean;
  CHECK(gen_synthetic(7, clean).injected.empty());

  SyntheticParams bad;
  bad.fp_rate = 0.8;
  bad.fn_rate = 0.5;
  CHECK_THROWS_AS(gen_synthetic(1, bad), BadParams);
  bad = {};
  bad.n_sessions = 0;
  CHECK_THROWS_AS(gen_synthetic(1, bad), BadParams);
  bad = {};
  bad.motif_palette.clear();
  CHECK_THROWS_AS(gen_synthetic(1, bad), BadParams);
}
