#pragma once

#include <vector>

#include "coronal/raster.hpp"

namespace coronal {

struct Offset {
  int dr = 0;
  int dc = 0;
};

/// Offsets with dr^2 + dc^2 <= radius^2.
std::vector<Offset> disc_element(int radius);

/// Morphology on the lon-periodic, lat-unbounded cylinder: the field is
/// treated as embedded in an infinite background plane in latitude, and
/// wraps in longitude. Closing is therefore extensive and idempotent.
BoolField dilate(const BoolField& mask, int radius);
BoolField erode(const BoolField& mask, int radius);
BoolField binary_close(const BoolField& mask, int radius);

}  // namespace coronal
