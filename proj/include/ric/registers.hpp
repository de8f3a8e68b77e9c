#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ric {

// Architectural 32-bit general purpose registers, in x86 encoding order.
enum class Reg : uint8_t { eax = 0, ecx, edx, ebx, esp, ebp, esi, edi };

inline constexpr int kRegCount = 8;

enum class Flag : uint8_t { z = 0, c, s, o, p, a };

inline constexpr int kFlagCount = 6;

const char* reg_name(Reg r);
const char* flag_name(Flag f);

/// A register as written in assembly text: the 32-bit parent plus the bit
/// slice it names (al -> eax[7..0], ah -> eax[15..8]).
struct SubReg {
  Reg parent;
  unsigned width;  // 8, 16 or 32
  unsigned shift;  // 0 or 8 (high byte registers)
};

std::optional<SubReg> parse_subreg(std::string_view name);

/// Names of the MMX/XMM registers. Their instruction semantics are not
/// modelled; the names are kept for clobber handling and pattern tagging.
/// Returns 0..7 for mm0..mm7 and 8..15 for xmm0..xmm7.
std::optional<int> parse_vector_reg(std::string_view name);
std::string vector_reg_name(int id);

/// Register set as a bitmask indexed by Reg.
class RegSet {
 public:
  constexpr RegSet() = default;
  constexpr explicit RegSet(uint8_t bits) : bits_(bits) {}
  static constexpr RegSet of(Reg r) { return RegSet(static_cast<uint8_t>(1u << static_cast<int>(r))); }
  static constexpr RegSet all() { return RegSet(0xff); }

  constexpr bool contains(Reg r) const { return (bits_ >> static_cast<int>(r)) & 1u; }
  constexpr void insert(Reg r) { bits_ |= static_cast<uint8_t>(1u << static_cast<int>(r)); }
  constexpr void erase(Reg r) { bits_ &= static_cast<uint8_t>(~(1u << static_cast<int>(r))); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr uint8_t bits() const { return bits_; }
  int size() const;
  std::optional<Reg> single() const;

  constexpr RegSet operator|(RegSet o) const { return RegSet(bits_ | o.bits_); }
  constexpr RegSet operator&(RegSet o) const { return RegSet(bits_ & o.bits_); }
  constexpr RegSet minus(RegSet o) const { return RegSet(bits_ & static_cast<uint8_t>(~o.bits_)); }
  constexpr bool operator==(const RegSet&) const = default;

  template <typename F>
  void for_each(F&& f) const {
    for (int i = 0; i < kRegCount; ++i)
      if ((bits_ >> i) & 1u) f(static_cast<Reg>(i));
  }

  std::string to_string() const;

 private:
  uint8_t bits_ = 0;
};

}  // namespace ric
