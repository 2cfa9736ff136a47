#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace lentil {

// Six-way grain label. Index order is fixed and shared by every table in the
// project (confusion matrices, mixtures, routing reports).
enum class GrainClass : int {
  Good = 0,
  Yellow = 1,
  Broken = 2,
  Peeled = 3,
  Dotted = 4,
  Reject = 5,
};

inline constexpr int kClassCount = 6;

// grains per class, indexed by GrainClass
using Mixture = std::array<int, kClassCount>;

const char* class_name(GrainClass c);

// Accepts canonical names plus the legacy alias "Refuse" for Reject.
std::optional<GrainClass> class_from_name(std::string_view name);

inline GrainClass class_from_index(int i) { return static_cast<GrainClass>(i); }
inline int class_index(GrainClass c) { return static_cast<int>(c); }

inline Mixture standard_mixture() { return {50, 10, 10, 10, 10, 10}; }

inline int mixture_total(const Mixture& m) {
  int n = 0;
  for (int c : m) n += c;
  return n;
}

}  // namespace lentil
