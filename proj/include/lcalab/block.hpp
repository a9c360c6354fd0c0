#pragma once

#include <compare>
#include <cstdint>
#include <string>

#include "lcalab/errors.hpp"

namespace lcalab {

enum class BlockKind : std::uint8_t { S = 0, A = 1, B = 2, D = 3 };

/// Half of a delusive block. `None` is used at table granularity, where a
/// D_i block is treated as a whole.
enum class Part : std::uint8_t { None = 0, L = 1, R = 2 };

/// Identifies one vertex subset of the construction. Exactly one of the
/// shapes S(side), A(level, side), B(level, side), D(level, part) is used.
struct BlockLabel {
  BlockKind kind = BlockKind::S;
  std::uint8_t level = 0;  // 1..k, 0 for S
  std::uint8_t side = 0;   // 1 or 2, 0 for D
  Part part = Part::None;  // D only

  static constexpr BlockLabel S(int side) {
    return {BlockKind::S, 0, static_cast<std::uint8_t>(side), Part::None};
  }
  static constexpr BlockLabel A(int level, int side) {
    return {BlockKind::A, static_cast<std::uint8_t>(level), static_cast<std::uint8_t>(side),
            Part::None};
  }
  static constexpr BlockLabel B(int level, int side) {
    return {BlockKind::B, static_cast<std::uint8_t>(level), static_cast<std::uint8_t>(side),
            Part::None};
  }
  static constexpr BlockLabel D(int level, Part part = Part::None) {
    return {BlockKind::D, static_cast<std::uint8_t>(level), 0, part};
  }

  constexpr bool is_delusive() const { return kind == BlockKind::D; }

  /// The same block with the D part dropped (table granularity).
  constexpr BlockLabel whole() const {
    BlockLabel w = *this;
    w.part = Part::None;
    return w;
  }

  constexpr bool well_formed() const {
    switch (kind) {
      case BlockKind::S:
        return level == 0 && (side == 1 || side == 2) && part == Part::None;
      case BlockKind::A:
      case BlockKind::B:
        return level >= 1 && (side == 1 || side == 2) && part == Part::None;
      case BlockKind::D:
        return level >= 1 && side == 0;
    }
    return false;
  }

  friend constexpr auto operator<=>(const BlockLabel&, const BlockLabel&) = default;

  /// "S^1", "A^2_3", "B^1_1", "D_2", "D_2L".
  std::string name() const {
    switch (kind) {
      case BlockKind::S:
        return "S^" + std::to_string(side);
      case BlockKind::A:
        return "A^" + std::to_string(side) + "_" + std::to_string(level);
      case BlockKind::B:
        return "B^" + std::to_string(side) + "_" + std::to_string(level);
      case BlockKind::D: {
        std::string n = "D_" + std::to_string(level);
        if (part == Part::L) n += "L";
        if (part == Part::R) n += "R";
        return n;
      }
    }
    return "?";
  }

  static BlockLabel parse(const std::string& text) {
    auto fail = [&]() -> BlockLabel { throw FormatError("bad block label '" + text + "'"); };
    if (text.size() < 3) return fail();
    try {
      if (text[0] == 'S' && text[1] == '^') return S(std::stoi(text.substr(2)));
      if ((text[0] == 'A' || text[0] == 'B') && text[1] == '^') {
        auto us = text.find('_');
        if (us == std::string::npos) return fail();
        int side = std::stoi(text.substr(2, us - 2));
        int level = std::stoi(text.substr(us + 1));
        return text[0] == 'A' ? A(level, side) : B(level, side);
      }
      if (text[0] == 'D' && text[1] == '_') {
        Part p = Part::None;
        std::string digits = text.substr(2);
        if (!digits.empty() && digits.back() == 'L') p = Part::L;
        if (!digits.empty() && digits.back() == 'R') p = Part::R;
        if (p != Part::None) digits.pop_back();
        return D(std::stoi(digits), p);
      }
    } catch (const std::logic_error&) {
      return fail();
    }
    return fail();
  }
};

/// Proper 2-coloring of the realized construction. Side-1 S/A blocks, side-2 B
/// blocks and D parts L are color 0; everything else is color 1. Every
/// edge type of the construction joins the two colors once each D vertex is
/// restricted to neighbors of the opposite color.
constexpr int color_of(const BlockLabel& b) {
  switch (b.kind) {
    case BlockKind::S:
    case BlockKind::A:
      return b.side == 1 ? 0 : 1;
    case BlockKind::B:
      return b.side == 1 ? 1 : 0;
    case BlockKind::D:
      return b.part == Part::R ? 1 : 0;
  }
  return 0;
}

}  // namespace lcalab
