// Alternating training over (codes), (dictionary), (encoder) blocks, plus
// the two ablation trainers and test-time sparse coding.
//
// Training modes:
//   joint        full objective, phases codes -> dict -> encoder per round
//   independent  autoencoder trained alone to convergence, then codes/dict
//                rounds on the code-fit terms only (gamma forced to 0)
//   wcc          joint with gamma forced to 0 (no cross-view agreement term)
//
// Every phase is an L-BFGS descent on the shared objective, so the recorded
// total loss never increases across phases or rounds.

#pragma once

#include <chroma/csv.hpp>
#include <chroma/lbfgs.hpp>
#include <chroma/objective.hpp>
#include <chroma/parallel.hpp>
#include <chroma/rng.hpp>
#include <chroma/types.hpp>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace chroma {

enum class TrainMode { joint, independent, wcc };

inline const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::joint: return "joint";
    case TrainMode::independent: return "independent";
    case TrainMode::wcc: return "wcc";
  }
  return "unknown";
}

struct PhaseRecord {
  int outer = 0;        // 0 = initialization
  std::string phase;
  LossBreakdown loss;
};

struct TrainReport {
  std::vector<LossBreakdown> trace;      // entry 0 = after init, then per round
  std::vector<PhaseRecord> phase_trace;  // finer grain, same loss definition
  bool converged = false;
  int outer_iters_used = 0;
  int line_search_failures = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline Vector pack_encoder(const ModelParams& p) {
  Vector v(p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size());
  Eigen::Index o = 0;
  v.segment(o, p.w1.size()) =
      Eigen::Map<const Vector>(p.w1.data(), p.w1.size());
  o += p.w1.size();
  v.segment(o, p.b1.size()) = p.b1;
  o += p.b1.size();
  v.segment(o, p.w2.size()) =
      Eigen::Map<const Vector>(p.w2.data(), p.w2.size());
  o += p.w2.size();
  v.segment(o, p.b2.size()) = p.b2;
  return v;
}

inline void unpack_encoder(const Vector& v, ModelParams& p) {
  Eigen::Index o = 0;
  Eigen::Map<Vector>(p.w1.data(), p.w1.size()) = v.segment(o, p.w1.size());
  o += p.w1.size();
  p.b1 = v.segment(o, p.b1.size());
  o += p.b1.size();
  Eigen::Map<Vector>(p.w2.data(), p.w2.size()) = v.segment(o, p.w2.size());
  o += p.w2.size();
  p.b2 = v.segment(o, p.b2.size());
}

inline Vector pack_grad_encoder(const GradientSet& g) {
  Vector v(g.d_w1.size() + g.d_b1.size() + g.d_w2.size() + g.d_b2.size());
  Eigen::Index o = 0;
  v.segment(o, g.d_w1.size()) =
      Eigen::Map<const Vector>(g.d_w1.data(), g.d_w1.size());
  o += g.d_w1.size();
  v.segment(o, g.d_b1.size()) = g.d_b1;
  o += g.d_b1.size();
  v.segment(o, g.d_w2.size()) =
      Eigen::Map<const Vector>(g.d_w2.data(), g.d_w2.size());
  o += g.d_w2.size();
  v.segment(o, g.d_b2.size()) = g.d_b2;
  return v;
}

// Fills a matrix with scaled standard normals, column-major order.
inline void fill_gaussian(Matrix& m, Rng& rng, double scale) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
}

inline void fill_gaussian(Vector& v, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.normal();
}

// Autoencoder-only objective: (1/m)||recon - X||_F^2 + lambda(||w1||^2 +
// ||w2||^2). Used for initialization and the independent-learning ablation.
inline double autoencoder_value_grad(const ModelParams& params,
                                     const HyperParams& hyper, const Matrix& x,
                                     double m, Vector* grad_out) {
  const Matrix lifted = lift(params, x);
  const Matrix err = reconstruct(params, lifted) - x;
  const double value =
      err.squaredNorm() / m +
      hyper.lambda * (params.w1.squaredNorm() + params.w2.squaredNorm());
  if (grad_out) {
    const Matrix g_recon = (2.0 / m) * err;
    const Matrix g_lift = params.w2 * g_recon;
    GradientSet g;
    g.d_w1 = x * g_lift.transpose() + 2.0 * hyper.lambda * params.w1;
    g.d_b1 = g_lift.rowwise().sum();
    g.d_w2 = lifted * g_recon.transpose() + 2.0 * hyper.lambda * params.w2;
    g.d_b2 = g_recon.rowwise().sum();
    *grad_out = pack_grad_encoder(g);
  }
  return value;
}

}  // namespace detail

// Test-time sparse coding: per column y, minimizes
//   beta ||y - D a||^2 + eta sum_i sqrt(a_i^2 + delta)
// from a = 0. Columns are independent; the result does not depend on
// scheduling. The seed parameter is reserved (the zero start point makes the
// solve deterministic without randomness).
inline Matrix encode_codes(const ModelParams& params, const HyperParams& hyper,
                           const Matrix& lifted, std::uint64_t /*seed*/ = 0) {
  const ValidationResult v = validate_model(params);
  if (!v.ok) throw Error(v.code, v.message);
  if (lifted.rows() != params.dict.rows())
    throw Error(Errc::shape_mismatch, "lifted rows do not match dictionary");

  const Eigen::Index d = params.atom_count();
  Matrix codes(d, lifted.cols());

  LbfgsConfig cfg;
  cfg.max_iters = hyper.lbfgs_iters;
  cfg.grad_tol = 1e-8;

  const Matrix& dict = params.dict;
  parallel_for(static_cast<std::size_t>(lifted.cols()), [&](std::size_t j) {
    const Vector y = lifted.col(static_cast<Eigen::Index>(j));
    auto objective = [&](const Vector& a, Vector& grad) {
      const Vector resid = y - dict * a;
      const Vector smooth = (a.array().square() + hyper.delta).sqrt();
      grad = -2.0 * hyper.beta * (dict.transpose() * resid) +
             hyper.eta * (a.array() / smooth.array()).matrix();
      return hyper.beta * resid.squaredNorm() + hyper.eta * smooth.sum();
    };
    const LbfgsResult r = lbfgs_minimize(objective, Vector::Zero(d), cfg);
    codes.col(static_cast<Eigen::Index>(j)) = r.x;
  });
  return codes;
}

namespace detail {

struct Phases {
  const HyperParams& hyper;
  const PixelBatchPair& batch;
  LbfgsConfig cfg;
  int line_search_failures = 0;

  Phases(const HyperParams& h, const PixelBatchPair& b) : hyper(h), batch(b) {
    cfg.max_iters = h.lbfgs_iters;
    cfg.grad_tol = 1e-8;
  }

  void note(const LbfgsResult& r) {
    if (r.line_search_failed) ++line_search_failures;
  }

  void codes(const ModelParams& params, SparseCodePair& codes_io) {
    const Eigen::Index d = params.atom_count();
    const Eigen::Index m = batch.count();
    Vector x0(2 * d * m);
    x0 << Eigen::Map<const Vector>(codes_io.alpha_a.data(), d * m),
        Eigen::Map<const Vector>(codes_io.alpha_b.data(), d * m);
    SparseCodePair work = codes_io;
    auto objective = [&](const Vector& v, Vector& grad) {
      Eigen::Map<Vector>(work.alpha_a.data(), d * m) = v.head(d * m);
      Eigen::Map<Vector>(work.alpha_b.data(), d * m) = v.tail(d * m);
      GradientSet g;
      const LossBreakdown l =
          loss_and_grad(params, hyper, batch, work, GradBlock::codes, &g);
      grad.resize(2 * d * m);
      grad << Eigen::Map<const Vector>(g.d_alpha_a.data(), d * m),
          Eigen::Map<const Vector>(g.d_alpha_b.data(), d * m);
      return l.total;
    };
    const LbfgsResult r = lbfgs_minimize(objective, x0, cfg);
    note(r);
    Eigen::Map<Vector>(codes_io.alpha_a.data(), d * m) = r.x.head(d * m);
    Eigen::Map<Vector>(codes_io.alpha_b.data(), d * m) = r.x.tail(d * m);
  }

  void dict(ModelParams& params, const SparseCodePair& codes_in) {
    const Eigen::Index n = params.dict.size();
    ModelParams work = params;
    auto objective = [&](const Vector& v, Vector& grad) {
      Eigen::Map<Vector>(work.dict.data(), n) = v;
      GradientSet g;
      const LossBreakdown l =
          loss_and_grad(work, hyper, batch, codes_in, GradBlock::dict, &g);
      grad = Eigen::Map<const Vector>(g.d_dict.data(), n);
      return l.total;
    };
    const LbfgsResult r = lbfgs_minimize(
        objective, Eigen::Map<const Vector>(params.dict.data(), n), cfg);
    note(r);
    Eigen::Map<Vector>(params.dict.data(), n) = r.x;
  }

  void encoder(ModelParams& params, const SparseCodePair& codes_in) {
    ModelParams work = params;
    auto objective = [&](const Vector& v, Vector& grad) {
      unpack_encoder(v, work);
      GradientSet g;
      const LossBreakdown l =
          loss_and_grad(work, hyper, batch, codes_in, GradBlock::encoder, &g);
      grad = pack_grad_encoder(g);
      return l.total;
    };
    const LbfgsResult r = lbfgs_minimize(objective, pack_encoder(params), cfg);
    note(r);
    unpack_encoder(r.x, params);
  }

  // Autoencoder-only descent; returns the objective value reached.
  double autoencoder(ModelParams& params) {
    const Matrix x = batch.concatenated();
    const double m = static_cast<double>(batch.count());
    ModelParams work = params;
    auto objective = [&](const Vector& v, Vector& grad) {
      unpack_encoder(v, work);
      return autoencoder_value_grad(work, hyper, x, m, &grad);
    };
    const LbfgsResult r = lbfgs_minimize(objective, pack_encoder(params), cfg);
    note(r);
    unpack_encoder(r.x, params);
    return r.fx;
  }
};

// Shared initialization: pre-trained autoencoder, dictionary from lifted
// samples, codes from one codes-phase descent. When ae_to_convergence is set
// the autoencoder stage repeats until its own relative improvement drops
// below hyper.tol (the independent-learning first phase).
inline std::pair<ModelParams, SparseCodePair> init_params_impl(
    const HyperParams& hyper, const PixelBatchPair& batch, std::uint64_t seed,
    bool ae_to_convergence, Phases& phases) {
  hyper.validate();
  batch.validate();

  const Eigen::Index n = batch.dim();
  const Eigen::Index h = hyper.h;
  const Eigen::Index d = hyper.d;
  Rng root(seed);

  // 1. random Gaussian start, scaled 0.01, then autoencoder pre-training
  ModelParams params;
  params.w1.resize(n, h);
  params.b1.resize(h);
  params.w2.resize(h, n);
  params.b2.resize(n);
  Rng enc_rng = root.split(0);
  detail::fill_gaussian(params.w1, enc_rng, 0.01);
  detail::fill_gaussian(params.b1, enc_rng, 0.01);
  detail::fill_gaussian(params.w2, enc_rng, 0.01);
  detail::fill_gaussian(params.b2, enc_rng, 0.01);

  double ae_value = phases.autoencoder(params);
  if (ae_to_convergence) {
    for (int round = 1; round < hyper.outer_iters; ++round) {
      const double next = phases.autoencoder(params);
      const double rel =
          std::abs(ae_value - next) / std::max(ae_value, 1e-12);
      ae_value = next;
      if (rel < hyper.tol) break;
    }
  }

  // 2. dictionary from d lifted samples drawn without replacement, padded
  //    with Gaussian columns when the batch is too small; unit-norm columns
  const Matrix lifted = lift(params, batch.concatenated());
  const Eigen::Index pool = lifted.cols();
  Rng pick_rng = root.split(1);
  std::vector<Eigen::Index> order(pool);
  for (Eigen::Index i = 0; i < pool; ++i) order[i] = i;
  const Eigen::Index take = std::min<Eigen::Index>(d, pool);
  for (Eigen::Index i = 0; i < take; ++i) {
    const Eigen::Index j =
        i + static_cast<Eigen::Index>(pick_rng.uniform_index(pool - i));
    std::swap(order[i], order[j]);
  }
  params.dict.resize(h, d);
  for (Eigen::Index i = 0; i < take; ++i)
    params.dict.col(i) = lifted.col(order[i]);
  if (take < d) {
    Matrix pad(h, d - take);
    Rng pad_rng = root.split(2);
    detail::fill_gaussian(pad, pad_rng, 1.0);
    params.dict.rightCols(d - take) = pad;
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    const double norm = params.dict.col(j).norm();
    if (norm > 1e-12) {
      params.dict.col(j) /= norm;
    } else {  // degenerate lifted sample, replace with a random direction
      Vector col(h);
      detail::fill_gaussian(col, pick_rng, 1.0);
      params.dict.col(j) = col / col.norm();
    }
  }

  // 3. codes from one codes-phase descent starting at zero
  SparseCodePair codes{Matrix::Zero(d, batch.count()),
                       Matrix::Zero(d, batch.count())};
  phases.codes(params, codes);
  return {std::move(params), std::move(codes)};
}

}  // namespace detail

// Deterministic initialization for one layer; same seed, same result.
inline std::pair<ModelParams, SparseCodePair> init_params(
    const HyperParams& hyper, const PixelBatchPair& batch,
    std::uint64_t seed) {
  detail::Phases phases(hyper, batch);
  return detail::init_params_impl(hyper, batch, seed, false, phases);
}

// Trains one layer on a paired batch. The loss trace records the full
// objective (with the mode's effective gamma) after initialization and after
// every outer round.
inline std::pair<ModelParams, TrainReport> train(const PixelBatchPair& batch,
                                                 const HyperParams& hyper_in,
                                                 TrainMode mode,
                                                 std::uint64_t seed) {
  HyperParams hyper = hyper_in;
  if (mode != TrainMode::joint) hyper.gamma = 0.0;
  hyper.validate();
  batch.validate();

  TrainReport report;
  if (batch.count() < hyper.d) {
    const std::string msg = "batch has m=" + std::to_string(batch.count()) +
                            " < d=" + std::to_string(hyper.d) +
                            " correspondences; m >= d recommended";
    warn("optim", "small-batch", msg);
    report.warnings.push_back(msg);
  }

  detail::Phases phases(hyper, batch);
  std::pair<ModelParams, SparseCodePair> state = detail::init_params_impl(
      hyper, batch, seed, mode == TrainMode::independent, phases);
  ModelParams& params = state.first;
  SparseCodePair& codes = state.second;

  auto record = [&](int outer, const char* phase) {
    const LossBreakdown l = loss(params, hyper, batch, codes);
    if (!std::isfinite(l.total))
      throw Error(Errc::non_finite_entry,
                  "loss diverged at outer=" + std::to_string(outer) +
                      " phase=" + phase + " total=" + std::to_string(l.total));
    report.phase_trace.push_back({outer, phase, l});
    return l;
  };

  report.trace.push_back(record(0, "init"));

  for (int outer = 1; outer <= hyper.outer_iters; ++outer) {
    report.outer_iters_used = outer;
    phases.codes(params, codes);
    record(outer, "codes");
    phases.dict(params, codes);
    record(outer, "dict");
    if (mode != TrainMode::independent) {
      phases.encoder(params, codes);
      record(outer, "encoder");
    }
    report.trace.push_back(report.phase_trace.back().loss);

    const double prev = report.trace[report.trace.size() - 2].total;
    const double curr = report.trace.back().total;
    if (std::abs(curr - prev) / std::max(prev, 1e-12) < hyper.tol) {
      report.converged = true;
      break;
    }
  }

  report.line_search_failures = phases.line_search_failures;
  if (report.line_search_failures > 0) {
    const std::string msg =
        std::to_string(report.line_search_failures) +
        " phase(s) stopped early: no Armijo step found";
    warn("optim", "line-search-failure", msg);
    report.warnings.push_back(msg);
  }
  return {std::move(params), std::move(report)};
}

// Report trace as CSV with a header row.
inline std::string report_to_csv(const TrainReport& report) {
  std::string out = "iteration,ae,sc,en,reg,total\n";
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    const LossBreakdown& l = report.trace[i];
    out += std::to_string(i) + ',' + format_real(l.ae) + ',' +
           format_real(l.sc) + ',' + format_real(l.en) + ',' +
           format_real(l.reg) + ',' + format_real(l.total) + '\n';
  }
  return out;
}

}  // namespace chroma
