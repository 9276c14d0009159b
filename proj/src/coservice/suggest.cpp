#include <algorithm>
#include <cmath>

#include "mrin/coservice.hpp"
#include "mrin/random.hpp"

namespace mrin {

SuggestionResponse decode_suggestion(const Tensor3& q, const TileGrid& state,
                                     const SuggestOptions& options) {
  if (q.width != state.width() || q.height != state.height() || q.channels != kActionTileCount) {
    throw ShapeMismatch("Q output does not match the state grid");
  }
  if (options.top_k < 0) throw std::invalid_argument("top_k must be non-negative");
  SuggestionResponse r;
  for (int y = 0; y < state.height(); ++y) {
    for (int x = 0; x < state.width(); ++x) {
      if (state.at(x, y) != kEmpty) continue;
      int best = 0;
      for (int c = 1; c < kActionTileCount; ++c) {
        if (q.at(x, y, c) > q.at(x, y, best)) best = c;
      }
      const double v = q.at(x, y, best);
      if (best == kEmpty || !std::isfinite(v) || v < options.threshold) continue;
      r.additions.push_back({x, y, static_cast<TileId>(best), v});
    }
  }
  std::stable_sort(r.additions.begin(), r.additions.end(),
                   [](const SuggestedAddition& a, const SuggestedAddition& b) {
                     if (a.q != b.q) return a.q > b.q;
                     return std::tie(a.y, a.x) < std::tie(b.y, b.x);
                   });
  if (r.additions.size() > static_cast<std::size_t>(options.top_k)) {
    r.additions.resize(static_cast<std::size_t>(options.top_k));
  }
  Fnv1a h;
  h.update("mrin.suggestion.v1");
  h.update_u64(static_cast<std::uint64_t>(state.width()));
  h.update_u64(static_cast<std::uint64_t>(state.height()));
  h.update(state.cells().data(), state.cells().size());
  for (const auto& a : r.additions) {
    h.update_u64(static_cast<std::uint64_t>(a.x));
    h.update_u64(static_cast<std::uint64_t>(a.y));
    h.update_u64(a.tile);
    h.update_double(a.q);
  }
  r.suggestion_id = to_hex(h.digest());
  return r;
}

SuggestionResponse suggest(const Model& model, const TileGrid& state, const SuggestOptions& options) {
  const auto acts = forward(model.params, to_state_tensor(state));
  auto r = decode_suggestion(acts.output, state, options);
  r.model_fingerprint = model.fingerprint;
  return r;
}

ChangeSet suggestion_changes(const SuggestionResponse& response) {
  ChangeSet out;
  for (const auto& a : response.additions) out.push_back({a.x, a.y, kEmpty, a.tile});
  return out;
}

}  // namespace mrin
