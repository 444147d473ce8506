// Photometric color-space transforms used by the baseline descriptors and the
// L2-norm pre-processing correction.
//
// Conventions: hue is stored in [0,1) rather than degrees so histogram code
// can bin every channel the same way; YUV uses BT.601 coefficients.

#pragma once

#include <chroma/types.hpp>

#include <algorithm>
#include <cmath>

namespace chroma {

enum class ColorSpaceTag {
  rgb,
  hsv,
  yuv,
  corrected_rgb,
  rg,  // only c1, c2 meaningful
  opponent,
  cspace,
};

struct ColorVector {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  ColorSpaceTag space = ColorSpaceTag::rgb;
};

// p / ||p||_2. The corrected space discards the per-pixel diagonal scale, so
// any uniform per-pixel gain cancels. Zero pixels are degenerate.
inline ColorVector l2_correct(const RgbPixel& p) {
  const double norm = std::sqrt(p.r * p.r + p.g * p.g + p.b * p.b);
  if (norm == 0.0)
    throw Error(Errc::degenerate_input, "cannot L2-correct the zero pixel");
  return {p.r / norm, p.g / norm, p.b / norm, ColorSpaceTag::corrected_rgb};
}

// Batch-friendly variant: maps the zero pixel to the zero vector and reports
// it through the counter instead of aborting the run.
inline ColorVector l2_correct_or_zero(const RgbPixel& p,
                                      std::size_t* degenerate_count) {
  const double norm = std::sqrt(p.r * p.r + p.g * p.g + p.b * p.b);
  if (norm == 0.0) {
    if (degenerate_count) ++*degenerate_count;
    return {0.0, 0.0, 0.0, ColorSpaceTag::corrected_rgb};
  }
  return {p.r / norm, p.g / norm, p.b / norm, ColorSpaceTag::corrected_rgb};
}

// Chromaticity r = R/(R+G+B), g = G/(R+G+B). Intensity-invariant.
inline ColorVector to_rg(const RgbPixel& p) {
  const double sum = p.r + p.g + p.b;
  if (sum == 0.0)
    throw Error(Errc::degenerate_input, "rg undefined for zero-sum pixel");
  return {p.r / sum, p.g / sum, 0.0, ColorSpaceTag::rg};
}

inline ColorVector to_rg_or_zero(const RgbPixel& p,
                                 std::size_t* degenerate_count) {
  const double sum = p.r + p.g + p.b;
  if (sum == 0.0) {
    if (degenerate_count) ++*degenerate_count;
    return {0.0, 0.0, 0.0, ColorSpaceTag::rg};
  }
  return {p.r / sum, p.g / sum, 0.0, ColorSpaceTag::rg};
}

namespace detail {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt3 = 0.57735026918962576451;
constexpr double kInvSqrt6 = 0.40824829046386301637;
}  // namespace detail

// Fixed orthonormal opponent transform:
//   O1 = (R - G)/sqrt(2)
//   O2 = (R + G - 2B)/sqrt(6)
//   O3 = (R + G + B)/sqrt(3)
// O1, O2 carry chroma (specularity-invariant), O3 is intensity.
inline ColorVector to_opponent(const RgbPixel& p) {
  using namespace detail;
  return {(p.r - p.g) * kInvSqrt2, (p.r + p.g - 2.0 * p.b) * kInvSqrt6,
          (p.r + p.g + p.b) * kInvSqrt3, ColorSpaceTag::opponent};
}

// Opponent chroma normalized by intensity: (O1/O3, O2/O3, O3). Adds
// shadow/shading invariance on the chroma channels.
inline ColorVector to_cspace(const RgbPixel& p) {
  const ColorVector o = to_opponent(p);
  if (o.c3 == 0.0)
    throw Error(Errc::degenerate_input, "C space undefined at zero intensity");
  return {o.c1 / o.c3, o.c2 / o.c3, o.c3, ColorSpaceTag::cspace};
}

inline ColorVector to_cspace_or_zero(const RgbPixel& p,
                                     std::size_t* degenerate_count) {
  const ColorVector o = to_opponent(p);
  if (o.c3 == 0.0) {
    if (degenerate_count) ++*degenerate_count;
    return {0.0, 0.0, 0.0, ColorSpaceTag::cspace};
  }
  return {o.c1 / o.c3, o.c2 / o.c3, o.c3, ColorSpaceTag::cspace};
}

// Standard HSV with H rescaled from degrees to [0,1); achromatic pixels get
// H = 0 by convention. Expects components in [0,1].
inline ColorVector to_hsv(const RgbPixel& p) {
  const double maxc = std::max({p.r, p.g, p.b});
  const double minc = std::min({p.r, p.g, p.b});
  const double delta = maxc - minc;
  const double v = maxc;
  const double s = maxc > 0.0 ? delta / maxc : 0.0;
  double h = 0.0;
  if (delta > 0.0) {
    if (maxc == p.r)
      h = std::fmod((p.g - p.b) / delta, 6.0);
    else if (maxc == p.g)
      h = (p.b - p.r) / delta + 2.0;
    else
      h = (p.r - p.g) / delta + 4.0;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
    if (h >= 1.0) h -= 1.0;
  }
  return {h, s, v, ColorSpaceTag::hsv};
}

// BT.601 YUV. Y in [0,1], U in [-0.436, 0.436], V in [-0.615, 0.615] for
// unit-range inputs.
inline ColorVector to_yuv(const RgbPixel& p) {
  const double y = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  const double u = 0.492 * (p.b - y);
  const double v = 0.877 * (p.r - y);
  return {y, u, v, ColorSpaceTag::yuv};
}

inline int channel_count(ColorSpaceTag space) {
  return space == ColorSpaceTag::rg ? 2 : 3;
}

// Per-pixel L2 correction of a whole image. Zero pixels become zero vectors;
// their count is accumulated in *degenerate_count when given.
inline FeatureMap correct_image(const FeatureMap& img,
                                std::size_t* degenerate_count = nullptr) {
  if (img.depth() != 3)
    throw Error(Errc::shape_mismatch, "correct_image expects depth-3 input");
  FeatureMap out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const ColorVector c = l2_correct_or_zero(
          {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)},
          degenerate_count);
      out.at(x, y, 0) = c.c1;
      out.at(x, y, 1) = c.c2;
      out.at(x, y, 2) = c.c3;
    }
  return out;
}

// Converts a depth-3 image into the named space (depth 2 for rg). Degenerate
// pixels map to zero vectors and are counted rather than thrown.
inline FeatureMap convert_image(const FeatureMap& img, ColorSpaceTag space,
                                std::size_t* degenerate_count = nullptr) {
  if (img.depth() != 3)
    throw Error(Errc::shape_mismatch, "convert_image expects depth-3 input");
  FeatureMap out(img.width(), img.height(), channel_count(space));
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const RgbPixel p{img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
      ColorVector c;
      switch (space) {
        case ColorSpaceTag::rgb:
        case ColorSpaceTag::corrected_rgb:
          c = {p.r, p.g, p.b, space};
          break;
        case ColorSpaceTag::hsv: c = to_hsv(p); break;
        case ColorSpaceTag::yuv: c = to_yuv(p); break;
        case ColorSpaceTag::rg: c = to_rg_or_zero(p, degenerate_count); break;
        case ColorSpaceTag::opponent: c = to_opponent(p); break;
        case ColorSpaceTag::cspace:
          c = to_cspace_or_zero(p, degenerate_count);
          break;
      }
      out.at(x, y, 0) = c.c1;
      out.at(x, y, 1) = c.c2;
      if (out.depth() == 3) out.at(x, y, 2) = c.c3;
    }
  return out;
}

}  // namespace chroma
