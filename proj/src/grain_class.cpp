#include "lentil/grain_class.hpp"

namespace lentil {

const char* class_name(GrainClass c) {
  switch (c) {
    case GrainClass::Good: return "Good";
    case GrainClass::Yellow: return "Yellow";
    case GrainClass::Broken: return "Broken";
    case GrainClass::Peeled: return "Peeled";
    case GrainClass::Dotted: return "Dotted";
    case GrainClass::Reject: return "Reject";
  }
  return "?";
}

std::optional<GrainClass> class_from_name(std::string_view name) {
  for (int i = 0; i < kClassCount; ++i) {
    if (name == class_name(class_from_index(i))) return class_from_index(i);
  }
  if (name == "Refuse") return GrainClass::Reject;
  return std::nullopt;
}

}  // namespace lentil
