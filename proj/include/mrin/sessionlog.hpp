#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrin/io_error.hpp"
#include "mrin/tensor.hpp"
#include "mrin/tilegrid.hpp"

namespace mrin {

enum class Actor { kHuman, kAgent };
enum class Verdict { kKeep, kDelete };

struct Placement {
  int x = 0;
  int y = 0;
  TileId tile = kEmpty;
  bool operator==(const Placement&) const = default;
  auto operator<=>(const Placement&) const = default;
};

/// A HUMAN judgement on an addition made by an earlier AGENT turn.
struct Decision {
  Placement target;
  Verdict verdict = Verdict::kKeep;
  bool operator==(const Decision&) const = default;
};

struct Turn {
  Actor actor = Actor::kHuman;
  ChangeSet changes;
  std::vector<Decision> decisions;
  bool operator==(const Turn&) const = default;
};

struct Session {
  std::string session_id;
  TileGrid initial;
  std::vector<Turn> turns;
  TileGrid final_level;
  bool operator==(const Session&) const = default;
};

/// Level before turn `turn_index` (0 = initial).
TileGrid level_before_turn(const Session& session, std::size_t turn_index);
/// Folds `initial` through every turn; throws StaleChange on inconsistency.
TileGrid replay(const Session& session);
/// Checks replay consistency and the decision invariants.
void validate_session(const Session& session);

struct TrainingInstance {
  std::int64_t instance_id = 0;
  std::string session_id;
  std::size_t turn_index = 0;
  Tensor3 state;     // W x H x 34
  Tensor3 target_q;  // W x H x 32
};

class SchemaViolation : public std::runtime_error {
 public:
  SchemaViolation(int line, const std::string& what);
  int line;
};

class NoAgentTurns : public std::runtime_error {
 public:
  NoAgentTurns() : std::runtime_error("corpus has no AGENT turns") {}
};

class BadParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr const char* kSessionLogSchema = "mrin.sessionlog";
inline constexpr int kSessionLogVersion = 1;

/// Line-delimited JSON: a schema header on line 1, then one session per line.
std::string serialize_sessions(const std::vector<Session>& sessions);
std::vector<Session> parse_sessions(const std::string& text);
void save_sessions(const std::vector<Session>& sessions, const std::filesystem::path& path);
std::vector<Session> load_sessions(const std::filesystem::path& path);

/// A single session or turn in the log's JSON shape (no header); parsing
/// validates like parse_sessions and reports line 1.
std::string serialize_session_record(const Session& session);
Session parse_session_record(const std::string& text);
std::string serialize_turn_record(const Turn& turn);
Turn parse_turn_record(const std::string& text);

/// One instance per AGENT turn, ids dense from 0 in corpus order.
std::vector<TrainingInstance> build_training_set(const std::vector<Session>& sessions);

/// Binary addition grid over the 32 action channels.
Tensor3 additions_to_target(const ChangeSet& changes, int width, int height);

// ---------------------------------------------------------------------------
// Synthetic corpora

enum class LabelKind { kFalsePositive, kFalseNegative };

/// Ground truth for one injected labeling error.
struct InjectedError {
  LabelKind kind = LabelKind::kFalsePositive;
  std::string session_id;
  Placement addition;
  std::size_t intro_turn = 0;          // AGENT turn that added it
  std::size_t decision_turn = 0;       // HUMAN turn that judged it
  std::size_t contradiction_turn = 0;  // turn that reversed the judgement
  bool operator==(const InjectedError&) const = default;
};

enum class Motif {
  kPipeField,
  kGoombaRow,
  kStaircase,
  kFloatingBlocks,
  kCoinArc,
  kTreeGrove,
};

const char* motif_name(Motif m);
std::vector<Motif> all_motifs();

struct SyntheticParams {
  int n_sessions = 20;
  int width = 12;
  int height = 8;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  std::vector<Motif> motif_palette = all_motifs();
  int agent_turns = 4;
  int min_agent_additions = 11;
  int max_agent_additions = 16;
  std::string id_prefix = "s";
};

struct SyntheticCorpus {
  std::vector<Session> sessions;
  std::vector<InjectedError> injected;
  std::vector<Motif> session_motifs;  // parallel to sessions
};

SyntheticCorpus gen_synthetic(std::uint64_t seed, const SyntheticParams& params);

}  // namespace mrin
