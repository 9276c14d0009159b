#include "mrin/tilegrid.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace mrin {
namespace {

constexpr std::string_view kStandardLegend = R"(# Tile legend: one entry per line, whitespace-separated key=value pairs.
# Keys: id (0..33), name (no spaces), glyph (one printable character).
# IDs 0..31 are action-placeable. PLAYER and FLAG appear only in states.
id=0 name=EMPTY glyph=-
id=1 name=GROUND glyph=X
id=2 name=BRICK glyph=S
id=3 name=QUESTION_BLOCK glyph=?
id=4 name=QUESTION_MUSHROOM glyph=Q
id=5 name=USED_BLOCK glyph=U
id=6 name=SOLID_BLOCK glyph=#
id=7 name=PIPE_TOP_LEFT glyph=<
id=8 name=PIPE_TOP_RIGHT glyph=>
id=9 name=PIPE_LEFT glyph=[
id=10 name=PIPE_RIGHT glyph=]
id=11 name=COIN glyph=o
id=12 name=GOOMBA glyph=E
id=13 name=KOOPA glyph=K
id=14 name=KOOPA_RED glyph=R
id=15 name=SPINY glyph=Y
id=16 name=PIRANHA glyph=p
id=17 name=BULLET_BILL_TOP glyph=B
id=18 name=BULLET_BILL_BASE glyph=b
id=19 name=MUSHROOM glyph=m
id=20 name=FIRE_FLOWER glyph=f
id=21 name=STAR glyph=*
id=22 name=ONE_UP glyph=1
id=23 name=TREE_TOP glyph=T
id=24 name=TREE_TRUNK glyph=|
id=25 name=PLATFORM glyph==
id=26 name=CLOUD glyph=C
id=27 name=HILL glyph=h
id=28 name=BUSH glyph=w
id=29 name=HAMMER_BRO glyph=H
id=30 name=LAKITU glyph=L
id=31 name=BEETLE glyph=e
id=32 name=PLAYER glyph=M
id=33 name=FLAG glyph=F
)";

std::string format_pos(int x, int y) {
  return "(" + std::to_string(x) + "," + std::to_string(y) + ")";
}

}  // namespace

UnknownGlyph::UnknownGlyph(char g, int l, int c)
    : std::runtime_error("unknown glyph '" + std::string(1, g) + "' at line " +
                         std::to_string(l) + ", column " + std::to_string(c)),
      glyph(g), line(l), col(c) {}

RaggedLines::RaggedLines(int l)
    : std::runtime_error("ragged level text: line " + std::to_string(l) +
                         " differs in length from line 1"),
      line(l) {}

GridTooSmall::GridTooSmall(int width, int height)
    : std::runtime_error("grid " + std::to_string(width) + "x" +
                         std::to_string(height) + " is smaller than 3x3") {}

StaleChange::StaleChange(int x_, int y_)
    : std::runtime_error("stale change at " + format_pos(x_, y_)), x(x_), y(y_) {}

OutOfRange::OutOfRange(int x_, int y_)
    : std::runtime_error("position " + format_pos(x_, y_) + " out of range"),
      x(x_), y(y_) {}

// ---------------------------------------------------------------------------
// Legend

Legend::Legend(std::vector<LegendEntry> entries) {
  if (entries.size() != kStateTileCount) {
    throw LegendError("legend must define exactly " +
                      std::to_string(kStateTileCount) + " tiles, got " +
                      std::to_string(entries.size()));
  }
  std::sort(entries.begin(), entries.end(),
            [](const LegendEntry& a, const LegendEntry& b) { return a.id < b.id; });
  by_glyph_.fill(-1);
  std::set<std::string> names;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.id != i) throw LegendError("legend ids must be dense 0..33");
    auto slot = static_cast<unsigned char>(e.glyph);
    if (by_glyph_[slot] != -1) {
      throw LegendError("duplicate glyph '" + std::string(1, e.glyph) + "'");
    }
    if (!names.insert(e.name).second) {
      throw LegendError("duplicate tile name " + e.name);
    }
    by_glyph_[slot] = static_cast<int>(i);
  }
  entries_ = std::move(entries);
}

const Legend& Legend::standard() {
  static const Legend legend = parse(kStandardLegend);
  return legend;
}

Legend Legend::parse(std::string_view text) {
  std::vector<LegendEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string token;
    std::optional<int> id;
    std::optional<std::string> name;
    std::optional<char> glyph;
    while (fields >> token) {
      auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw LegendError("line " + std::to_string(line_no) + ": expected key=value");
      }
      auto key = token.substr(0, eq);
      auto value = token.substr(eq + 1);
      if (key == "id") {
        try {
          id = std::stoi(value);
        } catch (const std::exception&) {
          throw LegendError("line " + std::to_string(line_no) + ": bad id");
        }
      } else if (key == "name") {
        name = value;
      } else if (key == "glyph") {
        if (value.size() != 1) {
          throw LegendError("line " + std::to_string(line_no) +
                            ": glyph must be one character");
        }
        glyph = value[0];
      } else {
        throw LegendError("line " + std::to_string(line_no) + ": unknown key " + key);
      }
    }
    if (!id || !name || !glyph || !is_valid_tile(*id)) {
      throw LegendError("line " + std::to_string(line_no) +
                        ": entry needs id in [0,33], name and glyph");
    }
    entries.push_back({static_cast<TileId>(*id), *name, *glyph});
  }
  return Legend(std::move(entries));
}

Legend Legend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LegendError("cannot open legend " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string Legend::render() const {
  std::string out;
  for (const auto& e : entries_) {
    out += "id=" + std::to_string(e.id) + " name=" + e.name + " glyph=" + e.glyph + "\n";
  }
  return out;
}

std::optional<TileId> Legend::tile_for_glyph(char glyph) const {
  int id = by_glyph_[static_cast<unsigned char>(glyph)];
  if (id < 0) return std::nullopt;
  return static_cast<TileId>(id);
}

std::optional<TileId> Legend::tile_for_name(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

bool Legend::operator==(const Legend& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.id != b.id || a.name != b.name || a.glyph != b.glyph) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// TileGrid

TileGrid::TileGrid(int width, int height, TileId fill)
    : width_(width), height_(height) {
  if (width < 3 || height < 3) throw GridTooSmall(width, height);
  if (!is_valid_tile(fill)) throw std::invalid_argument("invalid fill tile");
  cells_.assign(static_cast<std::size_t>(width) * height, fill);
}

void TileGrid::set(int x, int y, TileId tile) {
  if (!in_bounds(x, y)) throw OutOfRange(x, y);
  if (!is_valid_tile(tile)) {
    throw std::invalid_argument("invalid tile id " + std::to_string(tile));
  }
  cells_[index(x, y)] = tile;
}

bool TileGrid::is_action_grid() const {
  return std::none_of(cells_.begin(), cells_.end(),
                      [](TileId t) { return !is_action_tile(t); });
}

int TileGrid::count_non_empty() const {
  return static_cast<int>(std::count_if(cells_.begin(), cells_.end(),
                                        [](TileId t) { return t != kEmpty; }));
}

// ---------------------------------------------------------------------------
// Text format

TileGrid parse_text_level(std::string_view text, const Legend& legend) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  // A single trailing newline does not start a new row.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw GridTooSmall(0, 0);

  const auto width = lines.front().size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != width) throw RaggedLines(static_cast<int>(i) + 1);
  }
  TileGrid grid(static_cast<int>(width), static_cast<int>(lines.size()));
  for (std::size_t y = 0; y < lines.size(); ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      auto tile = legend.tile_for_glyph(lines[y][x]);
      if (!tile) {
        throw UnknownGlyph(lines[y][x], static_cast<int>(y) + 1,
                           static_cast<int>(x) + 1);
      }
      grid.set(static_cast<int>(x), static_cast<int>(y), *tile);
    }
  }
  return grid;
}

std::string render_text_level(const TileGrid& grid, const Legend& legend) {
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.width() + 1) * grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) out += legend.glyph(grid.at(x, y));
    out += '\n';
  }
  return out;
}

std::vector<std::string> to_glyph_rows(const TileGrid& grid, const Legend& legend) {
  std::vector<std::string> rows;
  rows.reserve(grid.height());
  for (int y = 0; y < grid.height(); ++y) {
    std::string row;
    for (int x = 0; x < grid.width(); ++x) row += legend.glyph(grid.at(x, y));
    rows.push_back(std::move(row));
  }
  return rows;
}

TileGrid from_glyph_rows(const std::vector<std::string>& rows, const Legend& legend) {
  std::string text;
  for (const auto& r : rows) {
    text += r;
    text += '\n';
  }
  return parse_text_level(text, legend);
}

// ---------------------------------------------------------------------------
// Encoding and patches

Tensor3 to_state_tensor(const TileGrid& grid) {
  Tensor3 t(grid.width(), grid.height(), kStateTileCount);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) t.at(x, y, grid.at(x, y)) = 1.0;
  }
  return t;
}

std::vector<Patch3> extract_patches(const TileGrid& grid) {
  if (grid.width() < 3 || grid.height() < 3) {
    throw GridTooSmall(grid.width(), grid.height());
  }
  std::vector<Patch3> patches;
  for (int y = 0; y + 3 <= grid.height(); ++y) {
    for (int x = 0; x + 3 <= grid.width(); ++x) {
      Patch3 p{};
      bool any = false;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          TileId t = grid.at(x + dx, y + dy);
          p[dy * 3 + dx] = t;
          any = any || t != kEmpty;
        }
      }
      if (any) patches.push_back(p);
    }
  }
  return patches;
}

// ---------------------------------------------------------------------------
// Change sets

ChangeSet diff(const TileGrid& a, const TileGrid& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionMismatch("diff of " + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " and " +
                            std::to_string(b.width()) + "x" +
                            std::to_string(b.height()) + " grids");
  }
  ChangeSet out;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (a.at(x, y) != b.at(x, y)) out.push_back({x, y, a.at(x, y), b.at(x, y)});
    }
  }
  return out;
}

void validate_changeset(const ChangeSet& changes) {
  std::set<std::pair<int, int>> seen;
  for (const auto& c : changes) {
    if (c.before == c.after) {
      throw std::invalid_argument("no-op change at " + format_pos(c.x, c.y));
    }
    if (!is_valid_tile(c.before) || !is_valid_tile(c.after)) {
      throw std::invalid_argument("invalid tile in change at " + format_pos(c.x, c.y));
    }
    if (!seen.emplace(c.x, c.y).second) {
      throw std::invalid_argument("duplicate position " + format_pos(c.x, c.y));
    }
  }
}

TileGrid apply(const TileGrid& grid, const ChangeSet& changes) {
  validate_changeset(changes);
  TileGrid out = grid;
  for (const auto& c : changes) {
    if (!grid.in_bounds(c.x, c.y)) throw OutOfRange(c.x, c.y);
    if (grid.at(c.x, c.y) != c.before) throw StaleChange(c.x, c.y);
    out.set(c.x, c.y, c.after);
  }
  return out;
}

TileGrid changeset_to_grid(const ChangeSet& changes, int width, int height) {
  TileGrid out(width, height);
  for (const auto& c : changes) {
    if (!out.in_bounds(c.x, c.y)) throw OutOfRange(c.x, c.y);
    out.set(c.x, c.y, c.after);
  }
  return out;
}

int count_additions(const ChangeSet& changes) {
  return static_cast<int>(std::count_if(changes.begin(), changes.end(), [](const CellChange& c) {
    return c.before == kEmpty && c.after != kEmpty;
  }));
}

}  // namespace mrin
