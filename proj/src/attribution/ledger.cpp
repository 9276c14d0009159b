#include <cmath>

#include "mrin/attribution.hpp"

namespace mrin {

DeltaLedger::DeltaLedger(const NetworkParams& shape_source, std::size_t instance_count)
    : instances_(instance_count) {
  for (int l = 0; l < kConvLayers; ++l) {
    const auto& seg = shape_source.conv_weights(l);
    specs_[l] = shape_source.config.convs[l];
    in_channels_[l] = shape_source.config.conv_in_channels(l);
    weights_[l] = seg.size();
    data_[l].assign(weights_[l] * instance_count, 0.0);
  }
}

DeltaLedger DeltaLedger::from_data(const std::array<ConvSpec, kConvLayers>& specs,
                                   const std::array<int, kConvLayers>& in_channels,
                                   std::size_t instance_count,
                                   std::array<std::vector<double>, kConvLayers> data,
                                   std::uint64_t batches) {
  DeltaLedger d;
  d.specs_ = specs;
  d.in_channels_ = in_channels;
  d.instances_ = instance_count;
  d.batches_ = batches;
  for (int l = 0; l < kConvLayers; ++l) {
    d.weights_[l] = static_cast<std::size_t>(specs[l].filters) * specs[l].kernel * specs[l].kernel *
                    in_channels[l];
    if (data[l].size() != d.weights_[l] * instance_count) {
      throw std::invalid_argument("ledger matrix size does not match its shape");
    }
  }
  d.data_ = std::move(data);
  return d;
}

std::size_t DeltaLedger::total_conv_weights() const {
  return weights_[0] + weights_[1] + weights_[2];
}

void DeltaLedger::record_batch(InstanceId instance, const NetworkParams& before,
                               const NetworkParams& after) {
  if (before.values.size() != after.values.size() || before.layout != after.layout) {
    throw std::invalid_argument("record_batch: parameter sets are not index-compatible");
  }
  for (int l = 0; l < kConvLayers; ++l) {
    if (before.conv_weights(l).size() != weights_[l]) {
      throw std::invalid_argument("record_batch: parameters do not match the ledger shape");
    }
  }
  record_batch(instance, pack_conv_weights(before), pack_conv_weights(after));
}

void DeltaLedger::record_batch(InstanceId instance, std::span<const double> conv_before,
                               std::span<const double> conv_after) {
  if (instance < 0 || static_cast<std::size_t>(instance) >= instances_) {
    throw IndexOutOfRange("instance id " + std::to_string(instance) + " outside [0," +
                          std::to_string(instances_) + ")");
  }
  if (conv_before.size() != total_conv_weights() || conv_after.size() != total_conv_weights()) {
    throw std::invalid_argument("record_batch: snapshot size does not match the ledger");
  }
  std::size_t packed = 0;
  for (int l = 0; l < kConvLayers; ++l) {
    double* col = data_[l].data() + static_cast<std::size_t>(instance) * weights_[l];
    for (std::size_t w = 0; w < weights_[l]; ++w, ++packed) {
      col[w] += conv_after[packed] - conv_before[packed];
    }
  }
  ++batches_;
}

double DeltaLedger::entry(int layer, std::size_t weight, InstanceId instance) const {
  if (layer < 0 || layer >= kConvLayers || weight >= weights_[layer] || instance < 0 ||
      static_cast<std::size_t>(instance) >= instances_) {
    throw IndexOutOfRange("ledger entry out of range");
  }
  return data_[layer][static_cast<std::size_t>(instance) * weights_[layer] + weight];
}

std::vector<double> pack_conv_weights(const NetworkParams& params) {
  std::vector<double> out;
  for (int l = 0; l < kConvLayers; ++l) {
    const auto& seg = params.conv_weights(l);
    out.insert(out.end(), params.values.begin() + static_cast<std::ptrdiff_t>(seg.offset),
               params.values.begin() + static_cast<std::ptrdiff_t>(seg.offset + seg.size()));
  }
  return out;
}

MrinArrays finalize(const DeltaLedger& ledger) {
  if (ledger.batches_recorded() == 0 || ledger.instance_count() == 0) throw EmptyLedger();
  MrinArrays out;
  const auto n = ledger.instance_count();
  for (int l = 0; l < kConvLayers; ++l) {
    auto& layer = out.layers[l];
    layer.spec = ledger.conv_specs()[l];
    layer.in_channels = ledger.conv_in_channels()[l];
    const auto weights = ledger.weight_count(l);
    layer.ids.assign(weights, 0);
    layer.altered.assign(weights, 0);
    layer.score.assign(weights, 0.0);
    const auto data = ledger.layer_data(l);
    for (std::size_t w = 0; w < weights; ++w) {
      InstanceId best = 0;
      double best_abs = std::fabs(data[w]);
      for (std::size_t i = 1; i < n; ++i) {
        const double a = std::fabs(data[i * weights + w]);
        if (a > best_abs) {  // strict: ties keep the smaller id
          best_abs = a;
          best = static_cast<InstanceId>(i);
        }
      }
      layer.ids[w] = best;
      layer.score[w] = best_abs;
      layer.altered[w] = best_abs > 0.0 ? 1 : 0;
    }
  }
  return out;
}

}  // namespace mrin
