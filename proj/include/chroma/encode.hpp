// Test-time feature extraction: per-pixel lifting + sparse coding into an
// M x N x d map, non-overlapping max pooling, and the two-layer stack.
//
// Layer 2 treats each 2x2-pooled layer-1 cell (a d-dimensional vector) the
// way layer 1 treats a pixel: it is lifted with the layer-2 encoder and coded
// against the layer-2 dictionary, then 4x4-pooled.

#pragma once

#include <chroma/data.hpp>
#include <chroma/objective.hpp>
#include <chroma/optim.hpp>
#include <chroma/types.hpp>

#include <string>
#include <utility>
#include <vector>

namespace chroma {

struct LayerStack {
  ModelParams layer1;  // input depth 3
  ModelParams layer2;  // input depth = layer1 atom count
  static constexpr int pool1 = 2;
  static constexpr int pool2 = 4;

  void validate() const {
    ValidationResult v = validate_model(layer1);
    if (!v.ok) throw Error(v.code, "layer1: " + v.message);
    v = validate_model(layer2);
    if (!v.ok) throw Error(v.code, "layer2: " + v.message);
    if (layer2.in_dim() != layer1.atom_count())
      throw Error(Errc::shape_mismatch,
                  "layer2 input dim " + std::to_string(layer2.in_dim()) +
                      " does not match layer1 atom count " +
                      std::to_string(layer1.atom_count()));
  }
};

// Encodes every grid cell independently: lift, then sparse-code. The output
// grid has the same width/height with depth equal to the atom count. Inputs
// are expected in the L2-corrected space (for layer 1).
inline FeatureMap encode_image(const ModelParams& params,
                               const HyperParams& hyper,
                               const FeatureMap& img) {
  if (img.depth() != params.in_dim())
    throw Error(Errc::shape_mismatch,
                "image depth " + std::to_string(img.depth()) +
                    " does not match model input dim " +
                    std::to_string(params.in_dim()));
  const Matrix lifted = lift(params, img.as_columns());
  const Matrix codes = encode_codes(params, hyper, lifted);
  return FeatureMap::from_columns(codes, img.width(), img.height());
}

// Channelwise maximum over non-overlapping window x window cells. Partial
// windows at the right/bottom edge take the maximum of the pixels present
// (equivalent to edge replication). Output is ceil(M/w) x ceil(N/w) x depth.
inline FeatureMap max_pool(const FeatureMap& map, int window) {
  if (window < 1) throw Error(Errc::invalid_input, "window must be >= 1");
  const int out_w = (map.width() + window - 1) / window;
  const int out_h = (map.height() + window - 1) / window;
  FeatureMap out(out_w, out_h, map.depth());
  for (int oy = 0; oy < out_h; ++oy) {
    const int y0 = oy * window;
    const int y1 = std::min(map.height(), y0 + window);
    for (int ox = 0; ox < out_w; ++ox) {
      const int x0 = ox * window;
      const int x1 = std::min(map.width(), x0 + window);
      for (int c = 0; c < map.depth(); ++c) {
        double best = map.at(x0, y0, c);
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) best = std::max(best, map.at(x, y, c));
        out.at(ox, oy, c) = best;
      }
    }
  }
  return out;
}

// Whole-image signatures from both layers: sig1 flattens the 2x2-pooled
// layer-1 code map; sig2 flattens the 4x4-pooled layer-2 code map computed
// on top of it.
inline std::pair<Vector, Vector> encode_two_layer(const LayerStack& stack,
                                                  const HyperParams& hyper,
                                                  const FeatureMap& img) {
  stack.validate();
  const FeatureMap pooled1 =
      max_pool(encode_image(stack.layer1, hyper, img), LayerStack::pool1);
  const FeatureMap pooled2 =
      max_pool(encode_image(stack.layer2, hyper, pooled1), LayerStack::pool2);
  Vector sig1 = Eigen::Map<const Vector>(
      pooled1.data().data(), static_cast<Eigen::Index>(pooled1.data().size()));
  Vector sig2 = Eigen::Map<const Vector>(
      pooled2.data().data(), static_cast<Eigen::Index>(pooled2.data().size()));
  return {std::move(sig1), std::move(sig2)};
}

// Single-layer signature: flattened 2x2-pooled code map.
inline Vector encode_signature(const ModelParams& params,
                               const HyperParams& hyper,
                               const FeatureMap& img) {
  const FeatureMap pooled =
      max_pool(encode_image(params, hyper, img), LayerStack::pool1);
  return Eigen::Map<const Vector>(
      pooled.data().data(), static_cast<Eigen::Index>(pooled.data().size()));
}

// Builds the layer-2 training batch: encodes each training patch pair with
// layer 1, pools 2x2, and samples corresponding pooled cells as paired
// d-dimensional observations.
inline PixelBatchPair build_layer2_batch(const std::vector<PatchPair>& pairs,
                                         const ModelParams& layer1,
                                         const HyperParams& hyper,
                                         Eigen::Index m, std::uint64_t seed) {
  if (pairs.empty())
    throw Error(Errc::invalid_input, "no patch pairs for layer-2 batch");
  if (m < 1) throw Error(Errc::invalid_input, "need m >= 1 samples");

  std::vector<Matrix> cells_a;
  std::vector<Matrix> cells_b;
  std::vector<std::size_t> offsets(1, 0);
  std::size_t degenerate = 0;
  for (const auto& raw : pairs) {
    const PatchPair pair = to_common_grid(raw);
    const FeatureMap map_a = max_pool(
        encode_image(layer1, hyper, correct_image(pair.patch_a, &degenerate)),
        LayerStack::pool1);
    const FeatureMap map_b = max_pool(
        encode_image(layer1, hyper, correct_image(pair.patch_b, &degenerate)),
        LayerStack::pool1);
    cells_a.push_back(map_a.as_columns());
    cells_b.push_back(map_b.as_columns());
    offsets.push_back(offsets.back() +
                      static_cast<std::size_t>(cells_a.back().cols()));
  }
  if (degenerate > 0)
    warn("encode", "degenerate-pixels",
         std::to_string(degenerate) + " zero pixels mapped to zero vectors");

  const std::size_t pool = offsets.back();
  Rng rng = Rng(seed).split(0);
  std::vector<std::size_t> picks(static_cast<std::size_t>(m));
  if (static_cast<std::size_t>(m) > pool) {
    warn("encode", "sampling-with-replacement",
         "layer-2 m=" + std::to_string(m) + " exceeds " +
             std::to_string(pool) + " pooled cells");
    for (auto& p : picks) p = rng.uniform_index(pool);
  } else {
    std::vector<std::size_t> order(pool);
    for (std::size_t i = 0; i < pool; ++i) order[i] = i;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::size_t j = i + rng.uniform_index(pool - i);
      std::swap(order[i], order[j]);
      picks[i] = order[i];
    }
  }

  PixelBatchPair batch;
  batch.view_a.resize(layer1.atom_count(), m);
  batch.view_b.resize(layer1.atom_count(), m);
  for (Eigen::Index col = 0; col < m; ++col) {
    const std::size_t flat = picks[static_cast<std::size_t>(col)];
    const std::size_t which =
        static_cast<std::size_t>(
            std::upper_bound(offsets.begin(), offsets.end(), flat) -
            offsets.begin()) -
        1;
    const Eigen::Index local = static_cast<Eigen::Index>(flat - offsets[which]);
    batch.view_a.col(col) = cells_a[which].col(local);
    batch.view_b.col(col) = cells_b[which].col(local);
  }
  return batch;
}

struct TwoLayerTraining {
  LayerStack stack;
  TrainReport report1;
  TrainReport report2;
};

// Trains the full stack: layer 1 on sampled pixel pairs, layer 2 on paired
// pooled layer-1 cells, with the same objective and mode at both levels.
inline TwoLayerTraining train_two_layer(const std::vector<PatchPair>& pairs,
                                        const HyperParams& hyper,
                                        TrainMode mode, std::uint64_t seed,
                                        Eigen::Index m1, Eigen::Index m2) {
  Rng root(seed);
  TwoLayerTraining out;
  const PixelBatchPair batch1 =
      sample_pixel_pairs(pairs, m1, root.split(10).next_u64());
  auto [layer1, report1] = train(batch1, hyper, mode, root.split(11).next_u64());
  out.report1 = std::move(report1);

  const PixelBatchPair batch2 = build_layer2_batch(
      pairs, layer1, hyper, m2, root.split(12).next_u64());
  auto [layer2, report2] = train(batch2, hyper, mode, root.split(13).next_u64());
  out.report2 = std::move(report2);

  out.stack.layer1 = std::move(layer1);
  out.stack.layer2 = std::move(layer2);
  return out;
}

}  // namespace chroma
