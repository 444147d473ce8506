// Limited-memory BFGS with backtracking Armijo line search.
//
// The callable evaluates f(x) and writes the gradient: double f(const
// Vector& x, Vector& grad). Only steps that satisfy the sufficient-decrease
// condition are accepted, so the returned point never has a higher objective
// value than the start.

#pragma once

#include <chroma/types.hpp>

#include <cmath>
#include <deque>
#include <utility>
#include <vector>

namespace chroma {

struct LbfgsConfig {
  int memory = 10;          // stored curvature pairs
  int max_iters = 100;
  double grad_tol = 1e-8;   // terminate when ||grad||_2 <= grad_tol
  double armijo_c = 1e-4;   // sufficient-decrease constant
  double contraction = 0.5; // backtracking step multiplier
  int max_backtracks = 50;

  void validate() const {
    if (memory < 1) throw Error(Errc::invalid_input, "memory must be >= 1");
    if (max_iters < 1)
      throw Error(Errc::invalid_input, "max_iters must be >= 1");
    if (!(grad_tol > 0.0))
      throw Error(Errc::invalid_input, "grad_tol must be positive");
  }
};

struct LbfgsResult {
  Vector x;
  double fx = 0.0;
  int iterations = 0;            // gradient-evaluation rounds, >= 1
  bool converged = false;        // hit grad_tol
  bool line_search_failed = false;
};

template <typename F>
LbfgsResult lbfgs_minimize(F&& f, const Vector& x0, const LbfgsConfig& cfg) {
  cfg.validate();

  LbfgsResult res;
  res.x = x0;
  Vector grad(x0.size());
  res.fx = f(res.x, grad);
  if (!std::isfinite(res.fx))
    throw Error(Errc::non_finite_entry, "objective not finite at start point");

  std::deque<std::pair<Vector, Vector>> history;  // (s, y) pairs, newest last
  Vector direction(x0.size());
  Vector x_new(x0.size());
  Vector grad_new(x0.size());

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    res.iterations = iter;
    if (grad.norm() <= cfg.grad_tol) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion for -H * grad.
    direction = -grad;
    std::vector<double> alphas(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      const double rho = 1.0 / y.dot(s);
      alphas[i] = rho * s.dot(direction);
      direction -= alphas[i] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      direction *= s.dot(y) / y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double rho = 1.0 / y.dot(s);
      const double beta = rho * y.dot(direction);
      direction += (alphas[i] - beta) * s;
    }

    double dir_grad = direction.dot(grad);
    if (dir_grad >= 0.0) {  // not a descent direction, fall back
      direction = -grad;
      dir_grad = -grad.squaredNorm();
    }

    // Backtracking until the Armijo condition holds. The comparison is on
    // the difference so sufficient decrease cannot vanish in rounding when
    // the step gets tiny.
    double step = 1.0;
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      x_new = res.x + step * direction;
      f_new = f(x_new, grad_new);
      if (std::isfinite(f_new) &&
          f_new - res.fx <= cfg.armijo_c * step * dir_grad) {
        accepted = true;
        break;
      }
      step *= cfg.contraction;
    }
    if (!accepted) {
      res.line_search_failed = true;
      return res;  // best point found so far
    }

    const Vector s = x_new - res.x;
    const Vector y = grad_new - grad;
    const double curvature = s.dot(y);
    if (curvature > 1e-12) {
      history.emplace_back(s, y);
      if (static_cast<int>(history.size()) > cfg.memory)
        history.pop_front();
    } else {
      // negative/zero curvature: the quasi-Newton model no longer matches
      // the local function, restart from steepest descent
      history.clear();
    }

    res.x.swap(x_new);
    grad.swap(grad_new);
    res.fx = f_new;
  }
  return res;
}

}  // namespace chroma
