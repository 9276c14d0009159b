#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mrin/tensor.hpp"

namespace mrin {

// Tile vocabulary. IDs 0..31 are action-placeable; PLAYER and FLAG only
// appear in level states.
using TileId = std::uint8_t;

inline constexpr int kStateTileCount = 34;
inline constexpr int kActionTileCount = 32;

inline constexpr TileId kEmpty = 0;
inline constexpr TileId kGround = 1;
inline constexpr TileId kPlayer = 32;
inline constexpr TileId kFlag = 33;

constexpr bool is_valid_tile(int id) { return id >= 0 && id < kStateTileCount; }
constexpr bool is_action_tile(int id) { return id >= 0 && id < kActionTileCount; }

struct LegendEntry {
  TileId id = kEmpty;
  std::string name;
  char glyph = '-';
};

/// Bidirectional glyph/name <-> TileId table covering all 34 state tiles.
class Legend {
 public:
  explicit Legend(std::vector<LegendEntry> entries);

  /// The built-in table; identical to data/tiles.legend.
  static const Legend& standard();

  /// Parses the key-value legend format:
  ///   # comment
  ///   id=1 name=GROUND glyph=X
  static Legend parse(std::string_view text);
  static Legend load(const std::filesystem::path& path);
  std::string render() const;

  std::optional<TileId> tile_for_glyph(char glyph) const;
  std::optional<TileId> tile_for_name(std::string_view name) const;
  char glyph(TileId id) const { return entries_.at(id).glyph; }
  const std::string& name(TileId id) const { return entries_.at(id).name; }
  const std::vector<LegendEntry>& entries() const { return entries_; }

  bool operator==(const Legend& other) const;

 private:
  std::vector<LegendEntry> entries_;  // indexed by id
  std::array<int, 256> by_glyph_{};
};

class LegendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownGlyph : public std::runtime_error {
 public:
  UnknownGlyph(char glyph, int line, int col);
  char glyph;
  int line;  // 1-based
  int col;   // 1-based
};

class RaggedLines : public std::runtime_error {
 public:
  explicit RaggedLines(int line);
  int line;  // 1-based index of the first line whose length differs
};

class GridTooSmall : public std::runtime_error {
 public:
  GridTooSmall(int width, int height);
};

class DimensionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StaleChange : public std::runtime_error {
 public:
  StaleChange(int x, int y);
  int x;
  int y;
};

class OutOfRange : public std::runtime_error {
 public:
  OutOfRange(int x, int y);
  int x;
  int y;
};

/// Row-major grid of tile IDs addressed as (x = column from left,
/// y = row from top). Serves both as a level state and, when it holds no
/// PLAYER/FLAG, as an action grid.
class TileGrid {
 public:
  TileGrid() = default;
  TileGrid(int width, int height, TileId fill = kEmpty);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return cells_.empty(); }

  TileId at(int x, int y) const { return cells_[index(x, y)]; }
  void set(int x, int y, TileId tile);
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  const std::vector<TileId>& cells() const { return cells_; }
  bool is_action_grid() const;
  int count_non_empty() const;

  bool operator==(const TileGrid&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<TileId> cells_;
};

struct CellChange {
  int x = 0;
  int y = 0;
  TileId before = kEmpty;
  TileId after = kEmpty;

  bool operator==(const CellChange&) const = default;
};

/// Ordered list of single-cell edits; before != after and positions unique.
using ChangeSet = std::vector<CellChange>;

/// A 3x3 window in row-major order.
using Patch3 = std::array<TileId, 9>;

TileGrid parse_text_level(std::string_view text,
                          const Legend& legend = Legend::standard());
std::string render_text_level(const TileGrid& grid,
                              const Legend& legend = Legend::standard());

/// Grid rows as glyph strings (the wire representation).
std::vector<std::string> to_glyph_rows(const TileGrid& grid,
                                       const Legend& legend = Legend::standard());
TileGrid from_glyph_rows(const std::vector<std::string>& rows,
                         const Legend& legend = Legend::standard());

/// One-hot state encoding, shape (width, height, 34).
Tensor3 to_state_tensor(const TileGrid& grid);

/// All 3x3 windows at stride 1 holding at least one non-EMPTY tile.
/// Duplicates are preserved.
std::vector<Patch3> extract_patches(const TileGrid& grid);

ChangeSet diff(const TileGrid& a, const TileGrid& b);
TileGrid apply(const TileGrid& grid, const ChangeSet& changes);
TileGrid changeset_to_grid(const ChangeSet& changes, int width, int height);

/// Throws std::invalid_argument if the change set repeats a position or
/// contains a no-op entry.
void validate_changeset(const ChangeSet& changes);

/// Entries that place a tile on an EMPTY cell.
int count_additions(const ChangeSet& changes);

}  // namespace mrin
