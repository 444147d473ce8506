// Cross-view ranking: distance computation, CMC curves (single- and
// multi-shot) and the two-layer score combination.

#pragma once

#include <chroma/csv.hpp>
#include <chroma/parallel.hpp>
#include <chroma/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace chroma {

enum class DistanceMetric { euclidean, cosine };

inline DistanceMetric metric_from_name(const std::string& name) {
  if (name == "euclidean") return DistanceMetric::euclidean;
  if (name == "cosine") return DistanceMetric::cosine;
  throw Error(Errc::invalid_input, "unknown metric '" + name + "'");
}

// Euclidean distance or cosine distance (1 - cosine similarity). A zero
// vector has no direction, so its cosine distance is defined as 1.
inline double distance(const Vector& a, const Vector& b,
                       DistanceMetric metric) {
  if (a.size() != b.size())
    throw Error(Errc::shape_mismatch,
                "vector lengths differ: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  if (metric == DistanceMetric::euclidean) return (a - b).norm();
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

// probe x gallery distance matrix; rows computed in parallel.
inline Matrix distance_matrix(const std::vector<Vector>& probes,
                              const std::vector<Vector>& gallery,
                              DistanceMetric metric) {
  Matrix d(probes.size(), gallery.size());
  parallel_for(probes.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < gallery.size(); ++j)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          distance(probes[i], gallery[j], metric);
  });
  return d;
}

namespace detail {

// Min-max normalization to [0,1]; a constant matrix maps to all zeros.
inline Matrix minmax_normalize(const Matrix& m) {
  const double lo = m.minCoeff();
  const double hi = m.maxCoeff();
  if (!(hi > lo)) return Matrix::Zero(m.rows(), m.cols());
  return (m.array() - lo) / (hi - lo);
}

}  // namespace detail

// Weighted sum of the min-max normalized layer scores.
inline Matrix combine_scores(const Matrix& d1, const Matrix& d2, double w1,
                             double w2) {
  if (d1.rows() != d2.rows() || d1.cols() != d2.cols())
    throw Error(Errc::shape_mismatch, "score matrices differ in shape");
  if (w1 < 0.0 || w2 < 0.0)
    throw Error(Errc::invalid_input, "weights must be nonnegative");
  return w1 * detail::minmax_normalize(d1) + w2 * detail::minmax_normalize(d2);
}

// Match rate per rank. values[k-1] is the fraction of probes whose best
// same-label gallery item appears within the top k by ascending distance.
struct CmcCurve {
  std::vector<double> values;

  double at_rank(std::size_t rank) const {
    if (rank < 1 || rank > values.size())
      throw Error(Errc::invalid_input, "rank out of range");
    return values[rank - 1];
  }

  std::string to_csv() const {
    std::string out = "rank,match_rate\n";
    for (std::size_t i = 0; i < values.size(); ++i)
      out += std::to_string(i + 1) + ',' + format_real(values[i]) + '\n';
    return out;
  }
};

// Single-shot CMC. Ties in distance break by gallery index, so results are
// deterministic. Probes without any same-label gallery entry are excluded
// with a warning.
inline CmcCurve cmc(const Matrix& distances,
                    const std::vector<int>& probe_labels,
                    const std::vector<int>& gallery_labels) {
  const Eigen::Index n_probe = distances.rows();
  const Eigen::Index n_gallery = distances.cols();
  if (static_cast<Eigen::Index>(probe_labels.size()) != n_probe ||
      static_cast<Eigen::Index>(gallery_labels.size()) != n_gallery)
    throw Error(Errc::shape_mismatch, "label counts do not match matrix");

  CmcCurve curve;
  curve.values.assign(static_cast<std::size_t>(n_gallery), 0.0);
  std::size_t counted = 0;
  std::size_t skipped = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_gallery));
  for (Eigen::Index p = 0; p < n_probe; ++p) {
    const bool has_match =
        std::find(gallery_labels.begin(), gallery_labels.end(),
                  probe_labels[static_cast<std::size_t>(p)]) !=
        gallery_labels.end();
    if (!has_match) {
      ++skipped;
      continue;
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return distances(p, a) < distances(p, b);
                     });
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (gallery_labels[static_cast<std::size_t>(order[k])] ==
          probe_labels[static_cast<std::size_t>(p)]) {
        for (std::size_t r = k; r < curve.values.size(); ++r)
          curve.values[r] += 1.0;
        break;
      }
    }
    ++counted;
  }
  if (skipped > 0)
    warn("eval", "unmatched-probes",
         std::to_string(skipped) + " probes have no gallery match");
  if (counted == 0)
    throw Error(Errc::invalid_input, "no probe has a gallery match");
  for (double& v : curve.values) v /= static_cast<double>(counted);
  return curve;
}

// Multi-shot CMC: the distance to an identity is the minimum over that
// identity's gallery images; ranking is then over identities (ordered by
// first gallery occurrence).
inline CmcCurve multishot_cmc(const Matrix& distances,
                              const std::vector<int>& probe_labels,
                              const std::vector<int>& gallery_labels) {
  if (static_cast<Eigen::Index>(gallery_labels.size()) != distances.cols())
    throw Error(Errc::shape_mismatch, "label counts do not match matrix");
  std::vector<int> identities;
  for (int label : gallery_labels)
    if (std::find(identities.begin(), identities.end(), label) ==
        identities.end())
      identities.push_back(label);

  Matrix reduced(distances.rows(),
                 static_cast<Eigen::Index>(identities.size()));
  for (std::size_t k = 0; k < identities.size(); ++k) {
    Vector best = Vector::Constant(distances.rows(),
                                   std::numeric_limits<double>::infinity());
    for (Eigen::Index g = 0; g < distances.cols(); ++g)
      if (gallery_labels[static_cast<std::size_t>(g)] == identities[k])
        best = best.cwiseMin(distances.col(g));
    reduced.col(static_cast<Eigen::Index>(k)) = best;
  }
  return cmc(reduced, probe_labels, identities);
}

}  // namespace chroma
