#include "ric/registers.hpp"

#include <array>
#include <bit>

namespace ric {

namespace {

constexpr std::array<const char*, kRegCount> kRegNames = {"eax", "ecx", "edx", "ebx",
                                                          "esp", "ebp", "esi", "edi"};
constexpr std::array<const char*, kFlagCount> kFlagNames = {"zf", "cf", "sf", "of", "pf", "af"};

struct SubRegName {
  const char* name;
  SubReg reg;
};

constexpr std::array<SubRegName, 24> kSubRegs = {{
    {"eax", {Reg::eax, 32, 0}}, {"ecx", {Reg::ecx, 32, 0}}, {"edx", {Reg::edx, 32, 0}},
    {"ebx", {Reg::ebx, 32, 0}}, {"esp", {Reg::esp, 32, 0}}, {"ebp", {Reg::ebp, 32, 0}},
    {"esi", {Reg::esi, 32, 0}}, {"edi", {Reg::edi, 32, 0}}, {"ax", {Reg::eax, 16, 0}},
    {"cx", {Reg::ecx, 16, 0}},  {"dx", {Reg::edx, 16, 0}},  {"bx", {Reg::ebx, 16, 0}},
    {"sp", {Reg::esp, 16, 0}},  {"bp", {Reg::ebp, 16, 0}},  {"si", {Reg::esi, 16, 0}},
    {"di", {Reg::edi, 16, 0}},  {"al", {Reg::eax, 8, 0}},   {"cl", {Reg::ecx, 8, 0}},
    {"dl", {Reg::edx, 8, 0}},   {"bl", {Reg::ebx, 8, 0}},   {"ah", {Reg::eax, 8, 8}},
    {"ch", {Reg::ecx, 8, 8}},   {"dh", {Reg::edx, 8, 8}},   {"bh", {Reg::ebx, 8, 8}},
}};

}  // namespace

const char* reg_name(Reg r) { return kRegNames[static_cast<int>(r)]; }
const char* flag_name(Flag f) { return kFlagNames[static_cast<int>(f)]; }

std::optional<SubReg> parse_subreg(std::string_view name) {
  for (const auto& s : kSubRegs)
    if (name == s.name) return s.reg;
  return std::nullopt;
}

std::optional<int> parse_vector_reg(std::string_view name) {
  int base = 0;
  if (name.size() == 3 && name.substr(0, 2) == "mm") {
    base = 0;
    name.remove_prefix(2);
  } else if (name.size() == 4 && name.substr(0, 3) == "xmm") {
    base = 8;
    name.remove_prefix(3);
  } else {
    return std::nullopt;
  }
  if (name[0] < '0' || name[0] > '7') return std::nullopt;
  return base + (name[0] - '0');
}

std::string vector_reg_name(int id) {
  return (id < 8 ? "mm" : "xmm") + std::to_string(id % 8);
}

int RegSet::size() const { return std::popcount(static_cast<unsigned>(bits_)); }

std::optional<Reg> RegSet::single() const {
  if (size() != 1) return std::nullopt;
  return static_cast<Reg>(std::countr_zero(static_cast<unsigned>(bits_)));
}

std::string RegSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for_each([&](Reg r) {
    if (!first) out += ",";
    out += reg_name(r);
    first = false;
  });
  return out + "}";
}

}  // namespace ric
