#include "coronal/morphology.hpp"

#include "coronal/error.hpp"

namespace coronal {

std::vector<Offset> disc_element(int radius) {
  CORONAL_EXPECTS(radius >= 0, "structuring radius must be non-negative");
  std::vector<Offset> out;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc <= radius * radius) out.push_back({dr, dc});
    }
  }
  return out;
}

namespace {

// Rows outside [0, rows) are background; columns wrap.
BoolField dilate_impl(const BoolField& mask, const std::vector<Offset>& element) {
  BoolField out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      for (const auto& o : element) {
        const int rr = r + o.dr;
        if (rr < 0 || rr >= mask.rows()) continue;
        out(rr, mask.wrap_col(c + o.dc)) = 1;
      }
    }
  }
  return out;
}

BoolField erode_impl(const BoolField& mask, const std::vector<Offset>& element) {
  BoolField out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      bool keep = true;
      for (const auto& o : element) {
        const int rr = r + o.dr;
        if (rr < 0 || rr >= mask.rows() || !mask(rr, mask.wrap_col(c + o.dc))) {
          keep = false;
          break;
        }
      }
      out(r, c) = keep ? 1 : 0;
    }
  }
  return out;
}

}  // namespace

BoolField dilate(const BoolField& mask, int radius) {
  return dilate_impl(mask, disc_element(radius));
}

BoolField erode(const BoolField& mask, int radius) {
  return erode_impl(mask, disc_element(radius));
}

BoolField binary_close(const BoolField& mask, int radius) {
  const auto element = disc_element(radius);
  if (radius == 0) return mask;
  // Pad latitude by `radius` so the dilation is not truncated at the poles;
  // beyond the padding the dilated set is provably empty.
  BoolField padded(mask.rows() + 2 * radius, mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) padded(r + radius, c) = mask(r, c);
  }
  const BoolField closed = erode_impl(dilate_impl(padded, element), element);
  BoolField out(mask.rows(), mask.cols(), 0);
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) out(r, c) = closed(r + radius, c);
  }
  return out;
}

}  // namespace coronal
