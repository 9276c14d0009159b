#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrin/attribution.hpp"
#include "mrin/evalharness.hpp"
#include "mrin/neuralnet.hpp"
#include "mrin/sessionlog.hpp"

namespace mrin {

// ---------------------------------------------------------------------------
// Suggestion decoding

struct SuggestOptions {
  double threshold = 0.5;
  int top_k = 16;
  bool operator==(const SuggestOptions&) const = default;
};

struct SuggestedAddition {
  int x = 0;
  int y = 0;
  TileId tile = kEmpty;
  double q = 0.0;
  bool operator==(const SuggestedAddition&) const = default;
};

struct SuggestionResponse {
  std::string suggestion_id;
  std::string model_fingerprint;
  std::vector<SuggestedAddition> additions;  // descending q, ties by (y, x)
};

/// Per-cell argmax over the action channels (ties to the lower channel);
/// a cell is proposed when the winner is not EMPTY, q >= threshold and the
/// state cell is EMPTY. The best `top_k` survive.
SuggestionResponse decode_suggestion(const Tensor3& q, const TileGrid& state,
                                     const SuggestOptions& options = {});
SuggestionResponse suggest(const Model& model, const TileGrid& state,
                           const SuggestOptions& options = {});
/// The additions as a change set against the state they were decoded from.
ChangeSet suggestion_changes(const SuggestionResponse& response);

// ---------------------------------------------------------------------------
// Wire format

inline constexpr int kWireVersion = 1;
inline constexpr const char* kSuggestionSchema = "mrin.suggestion";
inline constexpr const char* kExplanationSchema = "mrin.explanation";
inline constexpr const char* kSessionSchema = "mrin.session";
inline constexpr const char* kHealthSchema = "mrin.health";
inline constexpr const char* kErrorSchema = "mrin.error";

std::string suggestion_to_json(const SuggestionResponse& response);
std::string explanation_to_json(const Explanation& explanation);

/// Request failure carrying an HTTP status and a stable error code.
class RequestError : public std::runtime_error {
 public:
  RequestError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status(status), code(std::move(code)) {}
  int status;
  std::string code;
};

std::string error_to_json(const std::string& code, const std::string& message);

// ---------------------------------------------------------------------------
// Service

/// Immutable artifact snapshot served to requests.
struct ServiceArtifacts {
  Model model;
  MrinArrays mrin;
  std::vector<Session> training_sessions;
};

/// Loads model.bin and mrin.json from `model_dir` and checks that they pair
/// with each other and with the training corpus.
ServiceArtifacts load_artifacts(const std::filesystem::path& model_dir,
                                const std::filesystem::path& sessions_path);

struct ServiceOptions {
  SuggestOptions suggest;
  int layer = 1;
  SliceNorm norm = SliceNorm::kL1;
  std::filesystem::path live_log;  // empty: live sessions stay in memory
  std::filesystem::path model_dir;  // enables POST /reload
  std::filesystem::path sessions_path;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Transport-independent request handling. Suggest and explain read an
/// immutable snapshot; session appends are serialized.
class CoService {
 public:
  CoService(ServiceArtifacts artifacts, ServiceOptions options);

  HttpReply handle(const std::string& method, const std::string& path, const std::string& body);

  std::string suggest_json(const std::string& body) const;
  std::string explain_json(const std::string& body) const;
  std::string append_turn_json(const std::string& body);
  std::string get_session_json(const std::string& session_id) const;
  std::string health_json() const;
  std::string reload_json();

  std::vector<Session> live_sessions() const;

 private:
  std::shared_ptr<const ServiceArtifacts> snapshot() const;
  void persist_locked() const;

  ServiceOptions options_;
  mutable std::mutex artifacts_mu_;
  std::shared_ptr<const ServiceArtifacts> artifacts_;
  mutable std::mutex sessions_mu_;
  std::map<std::string, Session> live_;
  std::vector<std::string> live_order_;
};

/// Blocks serving HTTP on host:port until stop_server() or process exit.
/// `on_ready` receives the bound port (useful with port 0).
void serve_http(CoService& service, const std::string& host, int port,
                const std::function<void(int)>& on_ready = {});
void stop_server();

// ---------------------------------------------------------------------------
// Command line

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a run configuration can set. Unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  bool width_given = false;  // otherwise taken from the corpus
  bool height_given = false;
  SliceNorm norm = SliceNorm::kL1;
  int layer = 1;
  SuggestOptions suggest;
  std::size_t n_random = 20;
  int min_added = 10;
  WinRule win_rule = WinRule::kBeatsMean;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Artifact names inside a model directory.
inline constexpr const char* kModelFile = "model.bin";
inline constexpr const char* kMrinFile = "mrin.json";
inline constexpr const char* kFingerprintFile = "fingerprint.txt";
inline constexpr const char* kTrainLogFile = "train_log.csv";
inline constexpr const char* kConfigCopyFile = "config.json";

struct TrainArgs {
  std::optional<std::filesystem::path> config;
  std::filesystem::path sessions;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  bool audit_ledger = false;
};
int run_train(const TrainArgs& args, std::ostream& log, std::ostream& err);

enum class EvalKind { kExplain, kLabels };
struct EvalArgs {
  EvalKind kind = EvalKind::kExplain;
  std::optional<std::filesystem::path> config;
  std::filesystem::path model_dir;
  std::filesystem::path sessions;
  std::filesystem::path test;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};
int run_eval(const EvalArgs& args, std::ostream& log, std::ostream& err);

struct GenArgs {
  std::uint64_t seed = 0;
  std::filesystem::path out;
  SyntheticParams params;
  std::optional<std::filesystem::path> labels_out;  // injected ground truth as JSON
};
int run_gen_data(const GenArgs& args, std::ostream& log, std::ostream& err);

struct ServeArgs {
  std::optional<std::filesystem::path> config;
  std::filesystem::path model_dir;
  std::filesystem::path sessions;
  std::string bind = "127.0.0.1:8080";
  std::filesystem::path live_log;
};
int run_serve(const ServeArgs& args, std::ostream& log, std::ostream& err);

}  // namespace mrin
