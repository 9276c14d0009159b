#include <cmath>

#include "mrin/attribution.hpp"
#include "mrin/random.hpp"

namespace mrin {
namespace {

void hash_tensor(Fnv1a& h, const Tensor3& t) {
  h.update_u64(static_cast<std::uint64_t>(t.width));
  h.update_u64(static_cast<std::uint64_t>(t.height));
  h.update_u64(static_cast<std::uint64_t>(t.channels));
  for (double v : t.data) h.update_double(v);
}

void check_instances(const NetworkConfig& net, const std::vector<TrainingInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("training set is empty");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.instance_id != static_cast<InstanceId>(i)) {
      throw std::invalid_argument("instance ids must be dense from 0 in corpus order");
    }
    if (inst.state.width != net.width || inst.state.height != net.height ||
        inst.state.channels != net.in_channels || inst.target_q.width != net.width ||
        inst.target_q.height != net.height || inst.target_q.channels != net.out_channels) {
      throw ShapeMismatch("instance " + std::to_string(i) + " does not match the network shape");
    }
    for (double v : inst.target_q.data) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite Q target");
    }
  }
}

bool is_identity(const std::vector<std::size_t>& presentation, std::size_t n) {
  if (presentation.empty()) return true;
  if (presentation.size() != n) return false;
  for (std::size_t k = 0; k < n; ++k) {
    if (presentation[k] != k) return false;
  }
  return true;
}

}  // namespace

std::string training_fingerprint(const TrainConfig& config,
                                 const std::vector<TrainingInstance>& instances,
                                 const std::vector<std::size_t>& presentation) {
  Fnv1a h;
  const auto& n = config.net;
  h.update("mrin.train.v1");
  h.update_u64(static_cast<std::uint64_t>(n.width));
  h.update_u64(static_cast<std::uint64_t>(n.height));
  h.update_u64(static_cast<std::uint64_t>(n.in_channels));
  h.update_u64(static_cast<std::uint64_t>(n.out_channels));
  for (const auto& c : n.convs) {
    h.update_u64(static_cast<std::uint64_t>(c.filters));
    h.update_u64(static_cast<std::uint64_t>(c.kernel));
  }
  h.update_double(n.leaky_slope);
  h.update_double(n.adam.lr);
  h.update_double(n.adam.beta1);
  h.update_double(n.adam.beta2);
  h.update_double(n.adam.epsilon);
  h.update_u64(n.seed);
  h.update_u64(static_cast<std::uint64_t>(config.epochs));
  h.update_u64(instances.size());
  for (const auto& inst : instances) {
    h.update_u64(static_cast<std::uint64_t>(inst.instance_id));
    h.update(inst.session_id);
    h.update_u64(inst.turn_index);
    hash_tensor(h, inst.state);
    hash_tensor(h, inst.target_q);
  }
  if (!is_identity(presentation, instances.size())) {
    h.update("presentation");
    h.update_u64(presentation.size());
    for (auto k : presentation) h.update_u64(k);
  }
  return to_hex(h.digest());
}

TrainingResult train_with_attribution(const TrainConfig& config,
                                      const std::vector<TrainingInstance>& instances,
                                      const EpochCallback& on_epoch) {
  return train_with_attribution(config, instances, {}, on_epoch);
}

TrainingResult train_with_attribution(const TrainConfig& config,
                                      const std::vector<TrainingInstance>& instances,
                                      const std::vector<std::size_t>& presentation,
                                      const EpochCallback& on_epoch) {
  config.net.validate();
  if (config.epochs < 1) throw std::invalid_argument("epochs must be positive");
  check_instances(config.net, instances);
  std::vector<std::size_t> order = presentation;
  if (order.empty()) {
    for (std::size_t k = 0; k < instances.size(); ++k) order.push_back(k);
  }
  for (auto k : order) {
    if (k >= instances.size()) throw std::invalid_argument("presentation index out of range");
  }

  TrainingResult result;
  NetworkParams params = init_params(config.net);
  AdamMoments moments = make_moments(params.values.size());
  result.ledger = DeltaLedger(params, instances.size());
  std::vector<double> grad;
  std::int64_t step = 0;
  double first_loss = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double total = 0.0;
    for (auto k : order) {
      const auto& inst = instances[k];
      const auto before = pack_conv_weights(params);
      const double loss = backward(params, inst.state, inst.target_q, grad);
      if (step == 0) first_loss = loss;
      if (!std::isfinite(loss) || (first_loss > 0.0 && loss > config.divergence_factor * first_loss)) {
        throw NumericFailure("training diverged at epoch " + std::to_string(epoch + 1) + ", instance " +
                             std::to_string(inst.instance_id) + ": loss " + std::to_string(loss) +
                             " vs initial " + std::to_string(first_loss));
      }
      adam_step(params.values, grad, moments, ++step, config.net.adam);
      result.ledger.record_batch(inst.instance_id, before, pack_conv_weights(params));
      total += loss;
    }
    const double mean = total / static_cast<double>(order.size());
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  for (double v : params.values) {
    if (!std::isfinite(v)) throw NumericFailure("non-finite weight after training");
  }

  const auto fingerprint = training_fingerprint(config, instances, presentation);
  result.mrin = finalize(result.ledger);
  result.mrin.fingerprint = fingerprint;
  for (const auto& inst : instances) result.mrin.instance_sessions.push_back(inst.session_id);
  result.model.params = std::move(params);
  result.model.fingerprint = fingerprint;
  return result;
}

}  // namespace mrin
