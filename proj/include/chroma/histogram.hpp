// Block-wise joint histograms over sliding square blocks, concatenated into a
// whole-image signature.
//
// Binning is uniform over each channel's nominal range with half-open bins;
// the top edge is closed so a value exactly at the maximum lands in the last
// bin. Out-of-range values clamp to the boundary bins, so every pixel is
// assigned exactly once. Blocks are enumerated in raster order (top-to-bottom
// rows, left-to-right within a row) and each block's joint histogram is
// flattened with the first channel varying slowest.

#pragma once

#include <chroma/colorspace.hpp>
#include <chroma/types.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace chroma {

struct ChannelRange {
  double lo = 0.0;
  double hi = 1.0;
};

struct BlockHistogramSpec {
  int block_size = 8;
  int stride = 4;
  int bins_per_channel = 6;
  int channels = 3;
  bool normalize = true;  // L1-normalize each block histogram
  std::vector<ChannelRange> ranges;  // one per channel

  void validate() const {
    if (stride < 1 || block_size < stride)
      throw Error(Errc::invalid_input, "need block_size >= stride >= 1");
    if (bins_per_channel < 1)
      throw Error(Errc::invalid_input, "bins_per_channel must be >= 1");
    if (channels != 2 && channels != 3)
      throw Error(Errc::invalid_input, "channels must be 2 or 3");
    if (ranges.size() != static_cast<std::size_t>(channels))
      throw Error(Errc::invalid_input, "need one range per channel");
    for (const auto& r : ranges)
      if (!(r.hi > r.lo))
        throw Error(Errc::invalid_input, "channel range must be nonempty");
  }

  int bins_per_block() const {
    int n = 1;
    for (int c = 0; c < channels; ++c) n *= bins_per_channel;
    return n;
  }
};

using ImageSignature = std::vector<double>;

struct BlockGrid {
  int nx = 0;
  int ny = 0;
  int count() const { return nx * ny; }
};

inline BlockGrid count_blocks(int width, int height,
                              const BlockHistogramSpec& spec) {
  if (width < spec.block_size || height < spec.block_size)
    throw Error(Errc::invalid_input,
                "image " + std::to_string(width) + "x" +
                    std::to_string(height) + " smaller than one block");
  return {(width - spec.block_size) / spec.stride + 1,
          (height - spec.block_size) / spec.stride + 1};
}

// Fixed nominal ranges per space. The C space has no data-independent range;
// derive one with compute_value_ranges over the corpus instead.
inline std::vector<ChannelRange> default_ranges(ColorSpaceTag space) {
  using namespace detail;
  switch (space) {
    case ColorSpaceTag::rgb:
    case ColorSpaceTag::corrected_rgb:
    case ColorSpaceTag::hsv:
      return {{0, 1}, {0, 1}, {0, 1}};
    case ColorSpaceTag::yuv:
      return {{0, 1}, {-0.436, 0.436}, {-0.615, 0.615}};
    case ColorSpaceTag::rg:
      return {{0, 1}, {0, 1}};
    case ColorSpaceTag::opponent:
      return {{-kInvSqrt2, kInvSqrt2},
              {-2.0 * kInvSqrt6, 2.0 * kInvSqrt6},
              {0, 3.0 * kInvSqrt3}};
    case ColorSpaceTag::cspace:
      throw Error(Errc::invalid_input,
                  "C-space ranges must be derived from the data");
  }
  throw Error(Errc::invalid_input, "unknown color space");
}

// Per-channel min/max over a set of images; used for data-derived bin edges.
inline std::vector<ChannelRange> compute_value_ranges(
    const std::vector<FeatureMap>& images) {
  if (images.empty())
    throw Error(Errc::invalid_input, "no images to derive ranges from");
  const int depth = images.front().depth();
  std::vector<ChannelRange> ranges(
      depth, ChannelRange{std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()});
  for (const auto& img : images) {
    if (img.depth() != depth)
      throw Error(Errc::shape_mismatch, "images have mixed channel counts");
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < depth; ++c) {
          ranges[c].lo = std::min(ranges[c].lo, img.at(x, y, c));
          ranges[c].hi = std::max(ranges[c].hi, img.at(x, y, c));
        }
  }
  for (auto& r : ranges)
    if (!(r.hi > r.lo)) r.hi = r.lo + 1.0;  // constant channel: any width works
  return ranges;
}

namespace detail {

inline int bin_index(double v, const ChannelRange& r, int bins) {
  if (v <= r.lo) return 0;
  if (v >= r.hi) return bins - 1;
  const int idx = static_cast<int>((v - r.lo) / (r.hi - r.lo) * bins);
  return idx >= bins ? bins - 1 : idx;
}

}  // namespace detail

// Joint histogram per block, flattened block-by-block into one signature.
inline ImageSignature block_histogram(const FeatureMap& img,
                                      const BlockHistogramSpec& spec) {
  spec.validate();
  if (img.depth() != spec.channels)
    throw Error(Errc::shape_mismatch, "image depth does not match spec");
  const BlockGrid grid = count_blocks(img.width(), img.height(), spec);
  const int bins = spec.bins_per_block();
  ImageSignature sig(static_cast<std::size_t>(grid.count()) * bins, 0.0);

  std::size_t block = 0;
  for (int by = 0; by < grid.ny; ++by) {
    for (int bx = 0; bx < grid.nx; ++bx, ++block) {
      double* hist = sig.data() + block * bins;
      const int x0 = bx * spec.stride;
      const int y0 = by * spec.stride;
      for (int dy = 0; dy < spec.block_size; ++dy)
        for (int dx = 0; dx < spec.block_size; ++dx) {
          int idx = 0;
          for (int c = 0; c < spec.channels; ++c)
            idx = idx * spec.bins_per_channel +
                  detail::bin_index(img.at(x0 + dx, y0 + dy, c),
                                    spec.ranges[c], spec.bins_per_channel);
          hist[idx] += 1.0;
        }
      if (spec.normalize) {
        const double total =
            static_cast<double>(spec.block_size) * spec.block_size;
        for (int i = 0; i < bins; ++i) hist[i] /= total;
      }
    }
  }
  return sig;
}

}  // namespace chroma
