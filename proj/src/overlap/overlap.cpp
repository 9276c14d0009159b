#include "mrin/overlap.hpp"

#include <algorithm>
#include <unordered_map>

namespace mrin {
namespace {

struct PatchHash {
  std::size_t operator()(const Patch3& p) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (auto t : p) h = (h ^ t) * 1099511628211ULL;
    return h;
  }
};

}  // namespace

OverlapResult local_overlap_ratio(const TileGrid& level, const TileGrid& action) {
  const auto level_patches = extract_patches(level);
  const auto action_patches = extract_patches(action);
  if (action_patches.empty()) throw EmptyAction();

  std::unordered_map<Patch3, int, PatchHash> available;
  for (const auto& p : level_patches) ++available[p];
  int matched = 0;
  for (const auto& p : action_patches) {
    auto it = available.find(p);
    if (it != available.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  OverlapResult r;
  r.matched = matched;
  r.action_patches = static_cast<int>(action_patches.size());
  r.level_patches = static_cast<int>(level_patches.size());
  r.ratio = static_cast<double>(matched) / static_cast<double>(r.action_patches);
  return r;
}

OverlapResult local_overlap_ratio(const TileGrid& level, const ChangeSet& action) {
  return local_overlap_ratio(level, changeset_to_grid(action, level.width(), level.height()));
}

}  // namespace mrin
