#pragma once

#include "unitflow/units/types.hpp"

#include <string>

namespace unitflow::units {

inline UnitSequence collapse(const UnitSequence& u) {
  UnitSequence out;
  out.collapsed = true;
  out.ids.reserve(u.ids.size());
  for (int id : u.ids)
    if (out.ids.empty() || out.ids.back() != id) out.ids.push_back(id);
  return out;
}

inline PaddedUnits pad_to_frames(const UnitSequence& u, std::size_t target_len, int k) {
  require(u.collapsed, ErrorKind::InvalidInput, "pad_to_frames: units must be collapsed first");
  if (u.ids.size() > target_len)
    throw Error(ErrorKind::LengthOverflow, std::to_string(u.ids.size()) + " units exceed " +
                                               std::to_string(target_len) + " frames");
  PaddedUnits out;
  out.filler_id = k;
  out.ids = u.ids;
  out.ids.resize(target_len, k);
  return out;
}

}  // namespace unitflow::units
