#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrin/attribution.hpp"
#include "mrin/overlap.hpp"
#include "mrin/sessionlog.hpp"

namespace mrin {

// ---------------------------------------------------------------------------
// Labeling errors

/// A kept agent addition missing from the final level (false positive) or
/// a deleted one present in it (false negative), with its I/C/D states.
struct LabelErrorExample {
  LabelKind kind = LabelKind::kFalsePositive;
  std::string session_id;
  Placement addition;
  std::size_t intro_turn = 0;
  std::size_t decision_turn = 0;
  std::size_t contradiction_turn = 0;
  bool consistent = false;  // false if no contradicting edit could be located
  TileGrid i_state;
  TileGrid c_state;
  ChangeSet d_state;
};

struct IcdStates {
  TileGrid i_state;
  TileGrid c_state;
  ChangeSet d_state;
};

class InconsistentExample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* label_kind_name(LabelKind k);

/// Classifies every HUMAN decision on an AGENT addition against the final
/// level. One example per judged addition (its first decision counts).
std::vector<LabelErrorExample> detect_label_errors(const Session& session);

/// I = level before the introducing AGENT turn, C = level after the
/// contradicting turn, D = diff(I, C).
IcdStates build_icd(const Session& session, const LabelErrorExample& example);

// ---------------------------------------------------------------------------
// Evaluations

enum class WinRule { kBeatsMean, kBeatsMedian };

struct EvalOptions {
  std::size_t n_random = 20;
  int min_added = 10;  // explainability: strictly more additions required
  std::uint64_t seed = 0;
  WinRule win_rule = WinRule::kBeatsMean;
  int layer = 1;
  SliceNorm norm = SliceNorm::kL1;
};

struct ExampleTrace {
  std::string kind;  // "action", "FALSE_POSITIVE" or "FALSE_NEGATIVE"
  std::string session_id;
  std::size_t turn = 0;
  Placement addition;  // labeling examples only
  int compared_patches = 0;
  bool skipped = false;
  std::string skip_reason;
  InstanceId responsible_instance = -1;
  std::string responsible_session;
  int filter_index = -1;
  double responsible_ratio = 0.0;
  std::vector<std::string> random_sessions;
  std::vector<double> random_ratios;
  double random_baseline = 0.0;  // mean or median of random_ratios per the win rule
  double random_mean = 0.0;
  bool win = false;
};

struct Tally {
  std::size_t count = 0;
  std::size_t wins = 0;
  double mean_responsible_ratio = 0.0;
  double mean_random_ratio = 0.0;
  double win_rate() const { return count ? static_cast<double>(wins) / count : 0.0; }
};

struct EvalReport {
  std::string evaluation;  // "explainability" or "labeling_errors"
  std::uint64_t seed = 0;
  std::size_t n_random = 0;
  int min_added = 0;
  std::string win_rule;
  std::string model_fingerprint;
  std::string train_fingerprint;
  std::string test_fingerprint;
  std::size_t eligible_count = 0;  // evaluated, excluding skipped
  std::size_t skipped_count = 0;
  Tally combined;
  Tally false_positive;  // labeling evaluation only
  Tally false_negative;
  std::vector<ExampleTrace> traces;

  double win_rate() const { return combined.win_rate(); }
};

class NotEnoughTrainingLevels : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class NoEligibleInstances : public std::runtime_error {
 public:
  NoEligibleInstances() : std::runtime_error("no test action adds more than min_added components") {}
};
class NoExamplesFound : public std::runtime_error {
 public:
  NoExamplesFound() : std::runtime_error("test corpus contains no labeling errors") {}
};

/// Hash of a corpus' canonical serialization.
std::string corpus_fingerprint(const std::vector<Session>& sessions);

/// Responsible level vs random training levels against the agent's next action.
EvalReport explainability_eval(const Model& model, const MrinArrays& mrin,
                               const std::vector<Session>& train, const std::vector<Session>& test,
                               const EvalOptions& options);

/// Responsible level (queried at the I-state) vs random training levels
/// against each labeling error's D-state.
EvalReport labeling_error_eval(const Model& model, const MrinArrays& mrin,
                               const std::vector<Session>& train, const std::vector<Session>& test,
                               const EvalOptions& options);

/// Table layout: TestSet | Most Responsible Level | Random Levels, plus win rates.
std::string render_report_table(const EvalReport& report, const std::string& test_set_name);
/// Machine-readable record with every per-example trace.
std::string report_to_json(const EvalReport& report);

}  // namespace mrin
