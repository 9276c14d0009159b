#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrin/neuralnet.hpp"
#include "mrin/sessionlog.hpp"
#include "mrin/tilegrid.hpp"

namespace mrin {

using InstanceId = std::int64_t;

/// Signed per-weight, per-instance sums of the weight changes made while
/// each training instance was the (size one) batch. One matrix per conv
/// layer; conv biases and the dense layer are not tracked.
///
/// Storage is instance-major: the column for one instance is contiguous,
/// which is the access pattern of record_batch.
class DeltaLedger {
 public:
  DeltaLedger() = default;
  DeltaLedger(const NetworkParams& shape_source, std::size_t instance_count);

  /// S[w][instance] += after[w] - before[w] for every conv weight w.
  void record_batch(InstanceId instance, const NetworkParams& before, const NetworkParams& after);
  /// Same, for packed conv-weight snapshots (see pack_conv_weights).
  void record_batch(InstanceId instance, std::span<const double> conv_before,
                    std::span<const double> conv_after);

  double entry(int layer, std::size_t weight, InstanceId instance) const;
  std::size_t instance_count() const { return instances_; }
  std::size_t weight_count(int layer) const { return weights_[layer]; }
  std::size_t total_conv_weights() const;
  std::uint64_t batches_recorded() const { return batches_; }
  const std::array<ConvSpec, kConvLayers>& conv_specs() const { return specs_; }
  const std::array<int, kConvLayers>& conv_in_channels() const { return in_channels_; }

  /// Raw instance-major matrix of one layer.
  std::span<const double> layer_data(int layer) const { return data_[layer]; }
  /// Rebuilds a ledger from raw matrices (audit files).
  static DeltaLedger from_data(const std::array<ConvSpec, kConvLayers>& specs,
                               const std::array<int, kConvLayers>& in_channels,
                               std::size_t instance_count,
                               std::array<std::vector<double>, kConvLayers> data,
                               std::uint64_t batches);

  bool operator==(const DeltaLedger&) const = default;

 private:
  std::array<ConvSpec, kConvLayers> specs_{};
  std::array<int, kConvLayers> in_channels_{};
  std::array<std::size_t, kConvLayers> weights_{};
  std::size_t instances_ = 0;
  std::uint64_t batches_ = 0;
  std::array<std::vector<double>, kConvLayers> data_;
};

/// Concatenated conv1.w, conv2.w, conv3.w.
std::vector<double> pack_conv_weights(const NetworkParams& params);

class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class EmptyLedger : public std::runtime_error {
 public:
  EmptyLedger() : std::runtime_error("ledger has no recorded batches") {}
};

class FingerprintMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Responsible-instance array for one conv layer, shaped like its filters
/// (filter, ky, kx, channel).
struct MrinLayer {
  ConvSpec spec;
  int in_channels = 0;
  std::vector<InstanceId> ids;
  /// 0 where no instance ever changed the weight (every |S| is zero).
  std::vector<std::uint8_t> altered;
  /// max_i |S[w][i]|, the responsibility score behind ids[w].
  std::vector<double> score;

  std::size_t filter_size() const {
    return static_cast<std::size_t>(spec.kernel) * spec.kernel * in_channels;
  }
  std::span<const InstanceId> filter_ids(int filter) const {
    return std::span<const InstanceId>(ids).subspan(filter * filter_size(), filter_size());
  }
  bool operator==(const MrinLayer&) const = default;
};

struct MrinArrays {
  std::array<MrinLayer, kConvLayers> layers;
  std::string fingerprint;
  std::vector<std::string> instance_sessions;  // owning session per instance id
  bool operator==(const MrinArrays&) const = default;
};

/// MRIN(w) = argmax_i |S[w][i]|, ties to the smallest instance id.
MrinArrays finalize(const DeltaLedger& ledger);

enum class SliceNorm { kL1, kL2, kMax };

const char* slice_norm_name(SliceNorm n);
SliceNorm parse_slice_norm(const std::string& s);

/// Magnitude of every output slice of a conv layer (layer is 1-based).
std::vector<double> slice_magnitudes(const LayerActivations& acts, int layer,
                                     SliceNorm norm = SliceNorm::kL1);
/// Filter whose output slice has the largest magnitude; ties to the smallest index.
int most_activated_filter(const LayerActivations& acts, int layer,
                          SliceNorm norm = SliceNorm::kL1);

struct ResponsibleInstance {
  InstanceId instance_id = 0;
  int modal_count = 0;
};

/// Most frequent id in the filter's MRIN array, ties to the smallest id.
/// Entries for weights no instance ever altered carry no responsibility and
/// are skipped unless the whole filter is unaltered.
ResponsibleInstance most_responsible_instance(const MrinArrays& mrin, int layer, int filter);

struct Explanation {
  InstanceId instance_id = 0;
  std::string session_id;
  TileGrid responsible_level;
  int filter_index = 0;
  int modal_count = 0;
  int layer = 1;
};

class UnknownSession : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// forward -> most activated filter -> most responsible instance -> the
/// owning session's final level.
Explanation explain(const Model& model, const MrinArrays& mrin, const std::vector<Session>& sessions,
                    const Tensor3& state, int layer = 1, SliceNorm norm = SliceNorm::kL1);
Explanation explain(const Model& model, const MrinArrays& mrin, const std::vector<Session>& sessions,
                    const TileGrid& state, int layer = 1, SliceNorm norm = SliceNorm::kL1);

// ---------------------------------------------------------------------------
// Training with attribution

struct TrainConfig {
  NetworkConfig net;
  int epochs = 10;
  /// Training fails once a step's loss exceeds this multiple of the loss at
  /// the first step (or becomes non-finite).
  double divergence_factor = 1e6;
  bool operator==(const TrainConfig&) const = default;
};

class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingResult {
  Model model;
  MrinArrays mrin;
  DeltaLedger ledger;
  std::vector<double> epoch_losses;  // mean per-instance loss before each update
};

/// Hash of the run inputs: config, epochs, the ordered training data and,
/// when it differs from one pass in instance order, the presentation order.
std::string training_fingerprint(const TrainConfig& config,
                                 const std::vector<TrainingInstance>& instances,
                                 const std::vector<std::size_t>& presentation = {});

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Batch-size-one Adam training in instance order, recording every step
/// into the ledger. Strictly sequential: presentation order matters.
TrainingResult train_with_attribution(const TrainConfig& config,
                                      const std::vector<TrainingInstance>& instances,
                                      const EpochCallback& on_epoch = {});
/// Same, presenting `instances[presentation[k]]` at step k of every epoch.
/// Repeated entries accumulate into the same ledger column.
TrainingResult train_with_attribution(const TrainConfig& config,
                                      const std::vector<TrainingInstance>& instances,
                                      const std::vector<std::size_t>& presentation,
                                      const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// MRIN file

inline constexpr const char* kMrinSchema = "mrin.arrays";
inline constexpr int kMrinVersion = 1;

/// JSON container; `ledger` adds the full delta matrices for audit.
std::string serialize_mrin(const MrinArrays& mrin, const DeltaLedger* ledger = nullptr);
struct MrinFile {
  MrinArrays mrin;
  std::optional<DeltaLedger> ledger;
};
MrinFile parse_mrin(const std::string& text);
void save_mrin(const MrinArrays& mrin, const std::filesystem::path& path,
               const DeltaLedger* ledger = nullptr);
MrinFile load_mrin(const std::filesystem::path& path);

}  // namespace mrin
