#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lcalab/block.hpp"
#include "lcalab/errors.hpp"
#include "lcalab/rational.hpp"

namespace lcalab {

enum class Variant : std::uint8_t { core_only = 0, single_delusive = 1, full_hierarchy = 2 };
enum class World : std::uint8_t { yes = 0, no = 1 };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::core_only:
      return "core_only";
    case Variant::single_delusive:
      return "single_delusive";
    case Variant::full_hierarchy:
      return "full_hierarchy";
  }
  return "?";
}

inline std::string to_string(World w) { return w == World::yes ? "YES" : "NO"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "core_only" || s == "core") return Variant::core_only;
  if (s == "single_delusive" || s == "single") return Variant::single_delusive;
  if (s == "full_hierarchy" || s == "full") return Variant::full_hierarchy;
  throw InputError("unknown variant '" + s + "'");
}

inline World parse_world(const std::string& s) {
  if (s == "YES" || s == "yes") return World::yes;
  if (s == "NO" || s == "no") return World::no;
  throw InputError("unknown world '" + s + "'");
}

inline World other(World w) { return w == World::yes ? World::no : World::yes; }

/// Everything an attacker may know about the instance family: the shape of
/// the distribution, not the world or the sample.
struct PublicParams {
  std::uint64_t N = 0;
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::uint32_t s = 0;
  Variant variant = Variant::full_hierarchy;

  Rational epsilon() const { return Rational(1, k); }
  /// d' = d(1 + eps^3) + s
  Rational d_prime() const {
    return Rational(d) + Rational(d, std::uint64_t(k) * k * k) + Rational(s);
  }
  std::uint32_t max_degree() const {
    Rational dp = d_prime();
    BigInt f = floor_of(dp);
    return static_cast<std::uint32_t>(Rational(f) == dp ? f : f + 1);
  }
  /// n = (1/2 + 1/eps + eps - eps^2/2) N
  std::uint64_t n() const {
    Rational total = (Rational(1, 2) + Rational(k) + Rational(1, k) - Rational(1, 2 * k * k)) *
                     Rational(N);
    return static_cast<std::uint64_t>(boost::multiprecision::numerator(total));
  }
};

struct ConstructionParams {
  std::uint64_t N = 0;
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::uint32_t s = 0;
  Variant variant = Variant::full_hierarchy;
  World world = World::yes;
  std::uint64_t seed = 0;

  PublicParams public_view() const { return {N, k, d, s, variant}; }
  Rational epsilon() const { return public_view().epsilon(); }
  Rational d_prime() const { return public_view().d_prime(); }
  std::uint64_t n() const { return public_view().n(); }

  ConstructionParams with_world(World w) const {
    ConstructionParams p = *this;
    p.world = w;
    return p;
  }
  ConstructionParams with_seed(std::uint64_t s2) const {
    ConstructionParams p = *this;
    p.seed = s2;
    return p;
  }
  ConstructionParams with_variant(Variant v) const {
    ConstructionParams p = *this;
    p.variant = v;
    return p;
  }

  friend bool operator==(const ConstructionParams&, const ConstructionParams&) = default;
};

enum class ParamErrorKind { Divisibility, Range };

struct ParamViolation {
  ParamErrorKind kind;
  std::string message;
};

/// Structured rejection from build_params; lists every violated constraint.
class ParamsRejected : public InputError {
 public:
  explicit ParamsRejected(std::vector<ParamViolation> violations)
      : InputError(summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<ParamViolation>& violations() const { return violations_; }

  bool has(ParamErrorKind kind) const {
    for (const auto& v : violations_)
      if (v.kind == kind) return true;
    return false;
  }

 private:
  static std::string summarize(const std::vector<ParamViolation>& vs) {
    std::string out = "invalid construction parameters:";
    for (const auto& v : vs) {
      out += (v.kind == ParamErrorKind::Divisibility ? " [divisibility] " : " [range] ");
      out += v.message + ";";
    }
    return out;
  }

  std::vector<ParamViolation> violations_;
};

/// Conditions under which the construction is inside the regime the
/// probability expressions were written for. Violations are legal (desk-scale
/// instances need them) but change some table entries; see transition_table.
inline std::vector<std::string> regime_warnings(const ConstructionParams& p) {
  std::vector<std::string> out;
  const std::uint64_t k2 = std::uint64_t(p.k) * p.k;
  if (std::uint64_t(p.s) * k2 >= p.d)
    out.push_back("s >= eps^2 d: NO-world B_K cross-side numerator eps^2(d+s)-s may be <= 0");
  if (std::uint64_t(p.d) < 4 * k2 * k2) out.push_back("d < 4k^4: eps^4 d < 4");
  return out;
}

/// Validates raw parameters. With `strict_regime`, the regime conditions of
/// regime_warnings() are also enforced as range errors.
inline ConstructionParams build_params(std::int64_t N, std::int64_t k, std::int64_t d,
                                       std::int64_t s, Variant variant, World world,
                                       std::uint64_t seed, bool strict_regime = false) {
  std::vector<ParamViolation> bad;
  if (N <= 0) bad.push_back({ParamErrorKind::Range, "N must be positive"});
  if (k < 2) bad.push_back({ParamErrorKind::Range, "k must be at least 2"});
  if (k > 255) bad.push_back({ParamErrorKind::Range, "k must be at most 255"});
  if (d < 1) bad.push_back({ParamErrorKind::Range, "d must be positive"});
  if (s < 1) bad.push_back({ParamErrorKind::Range, "s must be positive"});
  if (N > 0 && k >= 2 && k <= 255 && N % (4 * k * k) != 0)
    bad.push_back({ParamErrorKind::Divisibility,
                   "N=" + std::to_string(N) + " is not divisible by 4k^2=" +
                       std::to_string(4 * k * k)});
  if (strict_regime && k >= 2 && d >= 1 && s >= 1) {
    if (s * k * k >= d)
      bad.push_back({ParamErrorKind::Range, "s must be below eps^2 d (s*k^2 < d)"});
    if (d < 4 * k * k * k * k) bad.push_back({ParamErrorKind::Range, "d must be at least 4k^4"});
  }
  if (!bad.empty()) throw ParamsRejected(std::move(bad));
  ConstructionParams p;
  p.N = static_cast<std::uint64_t>(N);
  p.k = static_cast<std::uint32_t>(k);
  p.d = static_cast<std::uint32_t>(d);
  p.s = static_cast<std::uint32_t>(s);
  p.variant = variant;
  p.world = world;
  p.seed = seed;
  return p;
}

inline ConstructionParams build_params(const ConstructionParams& raw, bool strict_regime = false) {
  return build_params(static_cast<std::int64_t>(raw.N), raw.k, raw.d, raw.s, raw.variant,
                      raw.world, raw.seed, strict_regime);
}

/// Vertex count per realized block (D blocks split into parts L and R).
struct BlockSizes {
  std::map<BlockLabel, std::uint64_t> sizes;

  std::uint64_t at(const BlockLabel& b) const {
    auto it = sizes.find(b);
    if (it != sizes.end()) return it->second;
    if (b.is_delusive() && b.part == Part::None) {
      return at(BlockLabel::D(b.level, Part::L)) + at(BlockLabel::D(b.level, Part::R));
    }
    throw InputError("no block " + b.name());
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [b, n] : sizes) t += n;
    return t;
  }
};

/// Canonical realized block order used for vertex numbering: S^1, S^2, then per
/// level A^1, A^2, B^1, B^2, then D_1L, D_1R, ..., D_kL, D_kR.
inline std::vector<BlockLabel> realized_blocks(std::uint32_t k) {
  std::vector<BlockLabel> out{BlockLabel::S(1), BlockLabel::S(2)};
  for (std::uint32_t i = 1; i <= k; ++i) {
    out.push_back(BlockLabel::A(i, 1));
    out.push_back(BlockLabel::A(i, 2));
    out.push_back(BlockLabel::B(i, 1));
    out.push_back(BlockLabel::B(i, 2));
  }
  for (std::uint32_t i = 1; i <= k; ++i) {
    out.push_back(BlockLabel::D(i, Part::L));
    out.push_back(BlockLabel::D(i, Part::R));
  }
  return out;
}

inline BlockSizes block_sizes(const PublicParams& p) {
  const std::uint64_t quarter = p.N / 4;
  const std::uint64_t eps2N = p.N / (std::uint64_t(p.k) * p.k);
  BlockSizes out;
  for (const auto& b : realized_blocks(p.k)) {
    std::uint64_t size = quarter;
    if (b.kind == BlockKind::A && b.level == p.k) size = quarter - eps2N / 4;
    if (b.kind == BlockKind::D) size = eps2N / 2;
    out.sizes[b] = size;
  }
  return out;
}

inline BlockSizes block_sizes(const ConstructionParams& p) { return block_sizes(p.public_view()); }

}  // namespace lcalab
