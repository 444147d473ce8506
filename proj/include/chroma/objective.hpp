// Joint training objective and its analytic gradients.
//
// For a paired batch X = [X_a X_b] (in_dim x 2m), lifted values
// L = w1^T X + b1 and codes A = [alpha_a alpha_b]:
//
//   ae  = (1/m)     || (w2^T L + b2) - X ||_F^2        reconstruction
//   sc  = (beta/m)  || L - D A ||_F^2                  code fit
//   en  = (gamma/m) || alpha_a - alpha_b ||_F^2        cross-view agreement
//   reg = lambda (||w1||_F^2 + ||w2||_F^2) + rho ||D||_F^2
//         + (eta/m) sum_ij sqrt(A_ij^2 + delta)        decay + smoothed L1
//
// The 1/m normalizer applies to the concatenated 2m-column batch. The
// smoothed-L1 derivative is A / sqrt(A^2 + delta) elementwise. Gradients are
// validated against central finite differences in the test suite.

#pragma once

#include <chroma/types.hpp>

#include <cmath>

namespace chroma {

struct GradientSet {
  Matrix d_w1;      // in_dim x h
  Vector d_b1;      // h
  Matrix d_w2;      // h x in_dim
  Vector d_b2;      // in_dim
  Matrix d_dict;    // h x d
  Matrix d_alpha_a; // d x m
  Matrix d_alpha_b; // d x m
};

enum class GradBlock { encoder, dict, codes };

// Affine lift into the h-dimensional space: w1^T x + b1 per column.
inline Matrix lift(const ModelParams& params, const Matrix& x) {
  if (x.rows() != params.w1.rows())
    throw Error(Errc::shape_mismatch, "lift: input rows do not match w1");
  return (params.w1.transpose() * x).colwise() + params.b1;
}

// Map back to the input space: w2^T lifted + b2 per column.
inline Matrix reconstruct(const ModelParams& params, const Matrix& lifted) {
  if (lifted.rows() != params.w2.rows())
    throw Error(Errc::shape_mismatch,
                "reconstruct: input rows do not match w2");
  return (params.w2.transpose() * lifted).colwise() + params.b2;
}

namespace detail {

inline void check_objective_shapes(const ModelParams& params,
                                   const PixelBatchPair& batch,
                                   const SparseCodePair& codes) {
  const ValidationResult v = validate_model(params);
  if (!v.ok) throw Error(v.code, v.message);
  if (batch.view_a.rows() != params.in_dim() ||
      batch.view_b.rows() != params.in_dim())
    throw Error(Errc::shape_mismatch, "batch rows do not match model in_dim");
  if (batch.view_a.cols() != batch.view_b.cols())
    throw Error(Errc::shape_mismatch, "batch views differ in column count");
  if (codes.alpha_a.rows() != params.atom_count() ||
      codes.alpha_b.rows() != params.atom_count())
    throw Error(Errc::shape_mismatch, "code rows do not match atom count");
  if (codes.alpha_a.cols() != batch.view_a.cols() ||
      codes.alpha_b.cols() != batch.view_b.cols())
    throw Error(Errc::shape_mismatch, "code columns do not match batch");
}

}  // namespace detail

// Full loss with per-term breakdown; total = ae + sc + en + reg.
// When grad_out is non-null the gradient of the selected block is written
// into it (other fields are left empty).
inline LossBreakdown loss_and_grad(const ModelParams& params,
                                   const HyperParams& hyper,
                                   const PixelBatchPair& batch,
                                   const SparseCodePair& codes,
                                   GradBlock block = GradBlock::encoder,
                                   GradientSet* grad_out = nullptr) {
  detail::check_objective_shapes(params, batch, codes);
  const double m = static_cast<double>(batch.count());

  const Matrix x = batch.concatenated();
  const Matrix alpha = codes.concatenated();
  const Matrix lifted = lift(params, x);
  const Matrix recon = reconstruct(params, lifted);

  const Matrix ae_err = recon - x;
  const Matrix sc_err = lifted - params.dict * alpha;
  const Matrix en_err = codes.alpha_a - codes.alpha_b;

  const Matrix smooth_l1 =
      (alpha.array().square() + hyper.delta).sqrt().matrix();

  LossBreakdown out;
  out.ae = ae_err.squaredNorm() / m;
  out.sc = hyper.beta / m * sc_err.squaredNorm();
  out.en = hyper.gamma / m * en_err.squaredNorm();
  out.reg = hyper.lambda * (params.w1.squaredNorm() + params.w2.squaredNorm()) +
            hyper.rho * params.dict.squaredNorm() +
            hyper.eta / m * smooth_l1.sum();
  out.total = out.ae + out.sc + out.en + out.reg;

  if (!grad_out) return out;

  const Matrix g_recon = (2.0 / m) * ae_err;
  switch (block) {
    case GradBlock::encoder: {
      Matrix g_lift = params.w2 * g_recon;
      g_lift.noalias() += (2.0 * hyper.beta / m) * sc_err;
      grad_out->d_w1 = x * g_lift.transpose() + 2.0 * hyper.lambda * params.w1;
      grad_out->d_b1 = g_lift.rowwise().sum();
      grad_out->d_w2 =
          lifted * g_recon.transpose() + 2.0 * hyper.lambda * params.w2;
      grad_out->d_b2 = g_recon.rowwise().sum();
      break;
    }
    case GradBlock::dict: {
      grad_out->d_dict = (-2.0 * hyper.beta / m) * (sc_err * alpha.transpose());
      grad_out->d_dict.noalias() += 2.0 * hyper.rho * params.dict;
      break;
    }
    case GradBlock::codes: {
      const Eigen::Index mc = codes.alpha_a.cols();
      // data term: -(2b/m) D^T (L - DA), plus smoothed-L1 slope
      Matrix g_alpha = (-2.0 * hyper.beta / m) * (params.dict.transpose() * sc_err);
      g_alpha.noalias() +=
          (hyper.eta / m) * (alpha.array() / smooth_l1.array()).matrix();
      grad_out->d_alpha_a = g_alpha.leftCols(mc);
      grad_out->d_alpha_b = g_alpha.rightCols(mc);
      grad_out->d_alpha_a.noalias() += (2.0 * hyper.gamma / m) * en_err;
      grad_out->d_alpha_b.noalias() -= (2.0 * hyper.gamma / m) * en_err;
      break;
    }
  }
  return out;
}

inline LossBreakdown loss(const ModelParams& params, const HyperParams& hyper,
                          const PixelBatchPair& batch,
                          const SparseCodePair& codes) {
  return loss_and_grad(params, hyper, batch, codes);
}

// Gradient of the full loss with respect to one parameter block, the other
// blocks held fixed. Only the selected block's fields are populated.
inline GradientSet grad(const ModelParams& params, const HyperParams& hyper,
                        const PixelBatchPair& batch,
                        const SparseCodePair& codes, GradBlock block) {
  GradientSet g;
  loss_and_grad(params, hyper, batch, codes, block, &g);
  return g;
}

}  // namespace chroma
