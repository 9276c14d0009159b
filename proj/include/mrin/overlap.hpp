#pragma once

#include <stdexcept>

#include "mrin/tilegrid.hpp"

namespace mrin {

struct OverlapResult {
  int matched = 0;
  int action_patches = 0;
  int level_patches = 0;
  double ratio = 0.0;  // matched / action_patches
};

class EmptyAction : public std::invalid_argument {
 public:
  EmptyAction() : std::invalid_argument("action has no non-empty 3x3 patch") {}
};

/// Local overlap ratio: the multiset intersection of the non-empty 3x3
/// patches of `level` and `action` (exact, position independent, each patch
/// consumed at most once) divided by the action's patch count.
OverlapResult local_overlap_ratio(const TileGrid& level, const TileGrid& action);

/// Same, with the action given as a change set rendered onto an empty grid
/// of the level's size.
OverlapResult local_overlap_ratio(const TileGrid& level, const ChangeSet& action);

}  // namespace mrin
