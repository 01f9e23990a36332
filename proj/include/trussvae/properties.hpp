#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "trussvae/elastic.hpp"
#include "trussvae/errors.hpp"

namespace trussvae {

/// stiffness9: the nine orthotropic components; curve13: compressive stress at
/// 0.5%, 2.5%, ..., 24.5% strain, supplied as external labels.
enum class PropertyKind : std::uint8_t { stiffness9 = 0, curve13 = 1 };

inline int property_length(PropertyKind k) { return k == PropertyKind::stiffness9 ? 9 : 13; }

inline std::string_view to_string(PropertyKind k) { return k == PropertyKind::stiffness9 ? "stiffness9" : "curve13"; }

inline PropertyKind parse_property_kind(std::string_view s) {
  if (s == "stiffness9") return PropertyKind::stiffness9;
  if (s == "curve13") return PropertyKind::curve13;
  throw ConfigError("unknown property kind '" + std::string(s) + "'");
}

struct PropertyVector {
  PropertyKind kind = PropertyKind::stiffness9;
  std::vector<double> values;

  static PropertyVector from_stiffness(const StiffnessRecord& r) {
    return {PropertyKind::stiffness9, std::vector<double>(r.s.begin(), r.s.end())};
  }

  StiffnessRecord stiffness() const {
    if (kind != PropertyKind::stiffness9 || values.size() != 9) throw ConfigError("property vector is not stiffness9");
    StiffnessRecord r;
    for (int i = 0; i < 9; ++i) r.s[i] = values[i];
    return r;
  }

  bool well_formed() const {
    if (int(values.size()) != property_length(kind)) return false;
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace trussvae
