#include <algorithm>
#include <cmath>
#include <map>

#include "mrin/attribution.hpp"

namespace mrin {

const char* slice_norm_name(SliceNorm n) {
  switch (n) {
    case SliceNorm::kL1: return "l1";
    case SliceNorm::kL2: return "l2";
    case SliceNorm::kMax: return "max";
  }
  return "l1";
}

SliceNorm parse_slice_norm(const std::string& s) {
  if (s == "l1") return SliceNorm::kL1;
  if (s == "l2") return SliceNorm::kL2;
  if (s == "max") return SliceNorm::kMax;
  throw std::invalid_argument("unknown slice norm '" + s + "' (expected l1, l2 or max)");
}

std::vector<double> slice_magnitudes(const LayerActivations& acts, int layer, SliceNorm norm) {
  if (layer < 1 || layer > kConvLayers) {
    throw std::invalid_argument("conv layer must be 1, 2 or 3");
  }
  const Tensor3& t = acts.conv[layer - 1];
  std::vector<double> mag(t.channels, 0.0);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      for (int f = 0; f < t.channels; ++f) {
        const double a = std::fabs(t.at(x, y, f));
        switch (norm) {
          case SliceNorm::kL1: mag[f] += a; break;
          case SliceNorm::kL2: mag[f] += a * a; break;
          case SliceNorm::kMax: mag[f] = std::max(mag[f], a); break;
        }
      }
    }
  }
  // L2 is compared squared; the argmax is the same.
  return mag;
}

int most_activated_filter(const LayerActivations& acts, int layer, SliceNorm norm) {
  const auto mag = slice_magnitudes(acts, layer, norm);
  int best = 0;
  for (int f = 1; f < static_cast<int>(mag.size()); ++f) {
    if (mag[f] > mag[best]) best = f;
  }
  return best;
}

ResponsibleInstance most_responsible_instance(const MrinArrays& mrin, int layer, int filter) {
  if (layer < 1 || layer > kConvLayers) throw std::invalid_argument("conv layer must be 1, 2 or 3");
  const auto& l = mrin.layers[layer - 1];
  if (filter < 0 || filter >= l.spec.filters) {
    throw std::out_of_range("filter index " + std::to_string(filter) + " out of range");
  }
  const auto ids = l.filter_ids(filter);
  const std::size_t base = static_cast<std::size_t>(filter) * l.filter_size();
  const bool any_altered = std::any_of(l.altered.begin() + static_cast<std::ptrdiff_t>(base),
                                       l.altered.begin() + static_cast<std::ptrdiff_t>(base + ids.size()),
                                       [](std::uint8_t a) { return a != 0; });
  std::map<InstanceId, int> counts;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (any_altered && !l.altered[base + k]) continue;
    ++counts[ids[k]];
  }
  ResponsibleInstance best;
  best.modal_count = -1;
  for (const auto& [id, c] : counts) {  // ascending id: ties keep the smaller one
    if (c > best.modal_count) best = {id, c};
  }
  return best;
}

Explanation explain(const Model& model, const MrinArrays& mrin, const std::vector<Session>& sessions,
                    const Tensor3& state, int layer, SliceNorm norm) {
  if (model.fingerprint != mrin.fingerprint) {
    throw FingerprintMismatch("model fingerprint " + model.fingerprint +
                              " does not match MRIN fingerprint " + mrin.fingerprint);
  }
  const auto acts = forward(model.params, state);
  Explanation e;
  e.layer = layer;
  e.filter_index = most_activated_filter(acts, layer, norm);
  const auto r = most_responsible_instance(mrin, layer, e.filter_index);
  e.instance_id = r.instance_id;
  e.modal_count = r.modal_count;
  if (r.instance_id < 0 || static_cast<std::size_t>(r.instance_id) >= mrin.instance_sessions.size()) {
    throw IndexOutOfRange("responsible instance has no owning session");
  }
  e.session_id = mrin.instance_sessions[static_cast<std::size_t>(r.instance_id)];
  auto it = std::find_if(sessions.begin(), sessions.end(),
                         [&](const Session& s) { return s.session_id == e.session_id; });
  if (it == sessions.end()) {
    throw UnknownSession("training session " + e.session_id + " not found in the corpus");
  }
  e.responsible_level = it->final_level;
  return e;
}

Explanation explain(const Model& model, const MrinArrays& mrin, const std::vector<Session>& sessions,
                    const TileGrid& state, int layer, SliceNorm norm) {
  return explain(model, mrin, sessions, to_state_tensor(state), layer, norm);
}

}  // namespace mrin
