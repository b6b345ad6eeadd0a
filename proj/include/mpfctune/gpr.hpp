// Copyright 2026 The mpfctune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MPFCTUNE_GPR_HPP_
#define MPFCTUNE_GPR_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "mpfctune/math.hpp"

namespace mpfctune {

/// A normally distributed scalar prediction.
struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

/// Training data for one scalar response.
struct Dataset {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;

  std::size_t size() const { return inputs.size(); }
  std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

  void add(std::vector<double> x, double y) {
    inputs.push_back(std::move(x));
    targets.push_back(y);
  }

  /// True if `x` lies within `tol` (sup-norm) of an existing input.
  bool contains(const std::vector<double>& x, double tol = 1e-12) const {
    for (const auto& p : inputs) {
      double d = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) d = std::max(d, std::abs(p[j] - x[j]));
      if (d <= tol) return true;
    }
    return false;
  }

  void validate() const {
    if (inputs.size() != targets.size()) {
      throw std::invalid_argument("Dataset: input/target length mismatch");
    }
    for (const auto& x : inputs) {
      if (x.size() != dim()) throw std::invalid_argument("Dataset: ragged inputs");
      for (double c : x) {
        if (!std::isfinite(c)) throw std::invalid_argument("Dataset: non-finite input");
      }
    }
    for (double y : targets) {
      if (!std::isfinite(y)) throw std::invalid_argument("Dataset: non-finite target");
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      for (std::size_t j = i + 1; j < inputs.size(); ++j) {
        double d = 0.0;
        for (std::size_t c = 0; c < dim(); ++c) {
          d = std::max(d, std::abs(inputs[i][c] - inputs[j][c]));
        }
        if (d <= 1e-12) throw std::invalid_argument("Dataset: duplicate inputs");
      }
    }
  }
};

/// Constant mean, signal variance, ARD length scales, and noise variance.
struct GprHyperparams {
  double mean = 0.0;
  double signal_var = 1.0;
  std::vector<double> length_scales;
  double noise_var = 1e-4;

  void validate(std::size_t dim) const {
    if (length_scales.size() != dim) {
      throw std::invalid_argument("GprHyperparams: length-scale dimension mismatch");
    }
    if (!(signal_var > 0.0) || !(noise_var > 0.0)) {
      throw std::invalid_argument("GprHyperparams: variances must be positive");
    }
    for (double l : length_scales) {
      if (!(l > 0.0)) throw std::invalid_argument("GprHyperparams: length scales must be positive");
    }
  }
};

/// Matern 5/2 covariance with automatic relevance determination:
/// k = sigma_f^2 (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r),
/// r^2 = sum_d ((x1_d - x2_d) / l_d)^2.
inline double matern52_ard(const std::vector<double>& x1, const std::vector<double>& x2,
                           const GprHyperparams& hyp) {
  if (x1.size() != x2.size() || x1.size() != hyp.length_scales.size()) {
    throw std::invalid_argument("matern52_ard: dimension mismatch");
  }
  double r2 = 0.0;
  for (std::size_t d = 0; d < x1.size(); ++d) {
    const double u = (x1[d] - x2[d]) / hyp.length_scales[d];
    r2 += u * u;
  }
  const double sr5 = std::sqrt(5.0 * r2);
  return hyp.signal_var * (1.0 + sr5 + 5.0 * r2 / 3.0) * std::exp(-sr5);
}

enum class GprMode { kAuto, kExact, kFitc };

struct FitOptions {
  GprMode mode = GprMode::kAuto;
  std::size_t sparse_threshold = 300;  // switch to FITC above this many points
  std::size_t inducing_count = 300;
  int restarts = 5;
  int max_iters = 150;        // Nelder-Mead iterations per restart
  std::uint64_t seed = 0x5eed;
  double noise_floor = 1e-8;  // lower bound on sigma_n^2
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = n > 0 ? static_cast<Eigen::Index>(rows.front().size()) : 0;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

/// Matern 5/2 cross-covariance of row sets A (na x d) and B (nb x d).
inline Eigen::MatrixXd matern_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const GprHyperparams& hyp) {
  const Eigen::Index na = a.rows(), nb = b.rows(), d = a.cols();
  Eigen::MatrixXd k(na, nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) {
        const double u = (a(i, c) - b(j, c)) / hyp.length_scales[c];
        r2 += u * u;
      }
      const double sr5 = std::sqrt(5.0 * r2);
      k(i, j) = hyp.signal_var * (1.0 + sr5 + 5.0 * r2 / 3.0) * std::exp(-sr5);
    }
  }
  return k;
}

/// Cholesky with escalating diagonal jitter up to `max_jitter`.
inline Eigen::LLT<Eigen::MatrixXd> robust_llt(Eigen::MatrixXd k, double max_jitter = 1e-6) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  double jitter = 1e-12;
  while (llt.info() != Eigen::Success && jitter <= max_jitter) {
    k.diagonal().array() += jitter;
    llt.compute(k);
    jitter *= 10.0;
  }
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("gpr: covariance factorization failed at max jitter");
  }
  return llt;
}

/// Bounded Nelder-Mead minimizer (deterministic; evaluations clamped to the
/// box). Good enough for the ~10-dimensional evidence surfaces here.
inline std::pair<std::vector<double>, double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
    const std::vector<double>& lo, const std::vector<double>& hi, int max_iters) {
  const std::size_t d = x0.size();
  auto clamp_point = [&](std::vector<double>& x) {
    for (std::size_t i = 0; i < d; ++i) x[i] = mpfctune::clamp(x[i], lo[i], hi[i]);
  };
  clamp_point(x0);

  std::vector<std::vector<double>> simplex(d + 1, x0);
  for (std::size_t i = 0; i < d; ++i) {
    const double step = 0.05 * std::max(1e-3, hi[i] - lo[i]);
    simplex[i + 1][i] += step;
    clamp_point(simplex[i + 1]);
    if (simplex[i + 1][i] == x0[i]) simplex[i + 1][i] = x0[i] - step;
  }
  std::vector<double> fv(d + 1);
  for (std::size_t i = 0; i <= d; ++i) fv[i] = f(simplex[i]);

  std::vector<std::size_t> order(d + 1);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order[0], worst = order[d], second = order[d - 1];
    if (std::abs(fv[worst] - fv[best]) <= 1e-10 * (1.0 + std::abs(fv[best]))) break;

    std::vector<double> centroid(d, 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == worst) continue;
      for (std::size_t c = 0; c < d; ++c) centroid[c] += simplex[i][c];
    }
    for (double& c : centroid) c /= static_cast<double>(d);

    auto blend = [&](double t) {
      std::vector<double> x(d);
      for (std::size_t c = 0; c < d; ++c) x[c] = centroid[c] + t * (centroid[c] - simplex[worst][c]);
      clamp_point(x);
      return x;
    };
    const auto reflected = blend(1.0);
    const double fr = f(reflected);
    if (fr < fv[order[0]]) {
      const auto expanded = blend(2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        fv[worst] = fe;
      } else {
        simplex[worst] = reflected;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      simplex[worst] = reflected;
      fv[worst] = fr;
    } else {
      const auto contracted = blend(fr < fv[worst] ? 0.5 : -0.5);
      const double fc = f(contracted);
      if (fc < std::min(fr, fv[worst])) {
        simplex[worst] = contracted;
        fv[worst] = fc;
      } else {
        for (std::size_t i = 0; i <= d; ++i) {  // shrink toward the best vertex
          if (i == best) continue;
          for (std::size_t c = 0; c < d; ++c) {
            simplex[i][c] = simplex[best][c] + 0.5 * (simplex[i][c] - simplex[best][c]);
          }
          fv[i] = f(simplex[i]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= d; ++i) {
    if (fv[i] < fv[best]) best = i;
  }
  return {simplex[best], fv[best]};
}

}  // namespace detail

/// Exact Gaussian log evidence of the targets under the kernel and a
/// constant mean.
inline double log_marginal_likelihood(const Dataset& data, const GprHyperparams& hyp) {
  data.validate();
  hyp.validate(data.dim());
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::MatrixXd x = detail::to_matrix(data.inputs);
  Eigen::MatrixXd k = detail::matern_cross(x, x, hyp);
  k.diagonal().array() += hyp.noise_var;
  const auto llt = detail::robust_llt(std::move(k));
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) r[i] = data.targets[i] - hyp.mean;
  const Eigen::VectorXd alpha = llt.solve(r);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (r.dot(alpha) + log_det + n * std::log(2.0 * kPi));
}

/// Fitted Gaussian-process surrogate: exact for small data, FITC above the
/// sparse threshold. Immutable after construction; predictions are safe to
/// call concurrently.
class GprModel {
 public:
  /// Fits hyperparameters by multi-start Nelder-Mead maximization of the
  /// (exact or FITC) log marginal likelihood on internally standardized
  /// targets. Deterministic for fixed data, options, and seeds.
  static GprModel fit(const Dataset& data, const FitOptions& opts = {}) {
    data.validate();
    if (data.size() < 2) throw std::invalid_argument("GprModel::fit: need at least 2 points");
    const std::size_t d = data.dim();

    GprModel model;
    model.init_data(data, opts);

    // hyperparameter vector: [mu, log sf2, log l_1..d, log sn2]
    const std::size_t hd = d + 3;
    std::vector<double> lo(hd), hi(hd), init(hd);
    lo[0] = -5.0;
    hi[0] = 5.0;
    init[0] = 0.0;
    lo[1] = std::log(1e-6);
    hi[1] = std::log(1e4);
    init[1] = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double scale = model.input_scale_[c];
      lo[2 + c] = std::log(1e-3 * scale);
      hi[2 + c] = std::log(1e3 * scale);
      init[2 + c] = std::log(scale);
    }
    lo[hd - 1] = std::log(opts.noise_floor);
    hi[hd - 1] = std::log(1e2);
    init[hd - 1] = std::log(std::max(1e-4, opts.noise_floor));

    const auto objective = [&](const std::vector<double>& theta) {
      const GprHyperparams hyp = model.unpack(theta);
      double value;
      try {
        value = model.mode_ == GprMode::kFitc ? model.fitc_lml(hyp) : model.exact_lml(hyp);
      } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
      }
      return std::isfinite(value) ? -value : std::numeric_limits<double>::infinity();
    };

    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> best_theta = init;
    for (int r = 0; r < opts.restarts; ++r) {
      std::vector<double> start = init;
      if (r > 0) {
        Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(r)));
        for (std::size_t c = 0; c < hd; ++c) start[c] = uniform(rng, lo[c], hi[c]);
      }
      const auto [theta, f] = detail::nelder_mead(objective, start, lo, hi, opts.max_iters);
      if (f < best_f) {
        best_f = f;
        best_theta = theta;
      }
    }
    if (!std::isfinite(best_f)) {
      model.fallback_ = true;  // keep prior hyperparameters
      best_theta = init;
    }
    model.hyp_ = model.unpack(best_theta);
    model.finalize();
    return model;
  }

  /// Builds a model with fixed hyperparameters (standardized-target space)
  /// and an explicit mode; `inducing` overrides the inducing subset for
  /// FITC (empty means the deterministic default).
  static GprModel with_hyperparams(const Dataset& data, const GprHyperparams& hyp,
                                   GprMode mode = GprMode::kExact,
                                   std::vector<std::size_t> inducing = {},
                                   const FitOptions& opts = {}) {
    data.validate();
    hyp.validate(data.dim());
    FitOptions o = opts;
    o.mode = mode;
    GprModel model;
    if (!inducing.empty()) model.inducing_override_ = std::move(inducing);
    model.init_data(data, o);
    model.hyp_ = hyp;
    model.finalize();
    return model;
  }

  Prediction predict(const std::vector<double>& x) const {
    if (x.size() != static_cast<std::size_t>(x_.cols())) {
      throw std::invalid_argument("GprModel::predict: dimension mismatch");
    }
    Eigen::VectorXd kv;
    double mean, var;
    if (mode_ == GprMode::kFitc) {
      kv = cross_to_inducing(x);
      const Eigen::VectorXd a = lm_.matrixL().solve(kv);
      const Eigen::VectorXd b = lb_.matrixL().solve(a);
      mean = hyp_.mean + a.dot(fitc_c_);
      var = hyp_.signal_var + hyp_.noise_var - a.squaredNorm() + b.squaredNorm();
    } else {
      kv.resize(x_.rows());
      for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        double r2 = 0.0;
        for (Eigen::Index c = 0; c < x_.cols(); ++c) {
          const double u = (x_(i, c) - x[c]) / hyp_.length_scales[c];
          r2 += u * u;
        }
        const double sr5 = std::sqrt(5.0 * r2);
        kv[i] = hyp_.signal_var * (1.0 + sr5 + 5.0 * r2 / 3.0) * std::exp(-sr5);
      }
      const Eigen::VectorXd v = llt_.matrixL().solve(kv);
      mean = hyp_.mean + kv.dot(alpha_);
      var = hyp_.signal_var + hyp_.noise_var - v.squaredNorm();
    }
    var = std::max(var, 0.0);
    return {y_mean_ + y_std_ * mean, y_std_ * std::sqrt(var)};
  }

  /// Batch prediction; considerably faster than point-wise calls for the
  /// random-search acquisition sweep.
  std::vector<Prediction> predict_batch(const std::vector<std::vector<double>>& xs) const {
    std::vector<Prediction> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(predict(x));
    return out;
  }

  const GprHyperparams& hyperparams() const { return hyp_; }
  GprMode mode() const { return mode_; }
  bool used_fallback() const { return fallback_; }
  std::size_t training_size() const { return static_cast<std::size_t>(x_.rows()); }
  const std::vector<std::size_t>& inducing_indices() const { return inducing_; }

  /// Prior predictive mean/variance on the original target scale.
  double prior_mean() const { return y_mean_ + y_std_ * hyp_.mean; }
  double prior_variance() const {
    return y_std_ * y_std_ * (hyp_.signal_var + hyp_.noise_var);
  }

 private:
  GprModel() = default;

  void init_data(const Dataset& data, const FitOptions& opts) {
    x_ = detail::to_matrix(data.inputs);
    const Eigen::Index n = x_.rows();
    y_raw_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) y_raw_[i] = data.targets[i];
    y_mean_ = y_raw_.mean();
    y_std_ = std::sqrt((y_raw_.array() - y_mean_).square().sum() / n);
    y_std_ = std::max(y_std_, 1e-12);
    y_ = (y_raw_.array() - y_mean_) / y_std_;

    input_scale_.resize(x_.cols());
    for (Eigen::Index c = 0; c < x_.cols(); ++c) {
      const double mu = x_.col(c).mean();
      const double sd = std::sqrt((x_.col(c).array() - mu).square().sum() / n);
      input_scale_[c] = std::max(sd, 1e-3);
    }

    mode_ = opts.mode;
    if (mode_ == GprMode::kAuto) {
      mode_ = data.size() > opts.sparse_threshold ? GprMode::kFitc : GprMode::kExact;
    }
    if (mode_ == GprMode::kFitc) {
      if (!inducing_override_.empty()) {
        inducing_ = inducing_override_;
      } else {
        // deterministic random subset, re-sampled per fit from the seed
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), 0u);
        Rng rng(mix_seed(opts.seed, 0x1d0cULL + data.size()));
        shuffle(idx, rng);
        const std::size_t m = std::min(opts.inducing_count, data.size());
        inducing_.assign(idx.begin(), idx.begin() + static_cast<long>(m));
        std::sort(inducing_.begin(), inducing_.end());
      }
      z_.resize(static_cast<Eigen::Index>(inducing_.size()), x_.cols());
      for (std::size_t i = 0; i < inducing_.size(); ++i) {
        z_.row(static_cast<Eigen::Index>(i)) = x_.row(static_cast<Eigen::Index>(inducing_[i]));
      }
    }
  }

  GprHyperparams unpack(const std::vector<double>& theta) const {
    GprHyperparams hyp;
    hyp.mean = theta[0];
    hyp.signal_var = std::exp(theta[1]);
    hyp.length_scales.resize(theta.size() - 3);
    for (std::size_t c = 0; c < hyp.length_scales.size(); ++c) {
      hyp.length_scales[c] = std::exp(theta[2 + c]);
    }
    hyp.noise_var = std::exp(theta.back());
    return hyp;
  }

  double exact_lml(const GprHyperparams& hyp) const {
    Eigen::MatrixXd k = detail::matern_cross(x_, x_, hyp);
    k.diagonal().array() += hyp.noise_var;
    const auto llt = detail::robust_llt(std::move(k));
    const Eigen::VectorXd r = y_.array() - hyp.mean;
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (r.dot(llt.solve(r)) + log_det + x_.rows() * std::log(2.0 * kPi));
  }

  // FITC evidence: log N(y | mu, Q_nn + Lambda) with
  // Q_nn = K_nm K_mm^-1 K_mn and Lambda = diag(K_nn - Q_nn) + sn^2 I,
  // evaluated in O(n m^2) via the Woodbury identity.
  double fitc_lml(const GprHyperparams& hyp) const {
    const Eigen::Index n = x_.rows(), m = z_.rows();
    Eigen::MatrixXd kmm = detail::matern_cross(z_, z_, hyp);
    kmm.diagonal().array() += 1e-10;
    const auto lm = detail::robust_llt(std::move(kmm));
    const Eigen::MatrixXd kmn = detail::matern_cross(z_, x_, hyp);
    const Eigen::MatrixXd v = lm.matrixL().solve(kmn);  // m x n
    Eigen::VectorXd lambda(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      lambda[i] = std::max(hyp.signal_var - v.col(i).squaredNorm(), 0.0) + hyp.noise_var;
    }
    const Eigen::VectorXd r = y_.array() - hyp.mean;
    const Eigen::MatrixXd vs = v * lambda.cwiseInverse().asDiagonal();
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(m, m) + vs * v.transpose();
    const auto lb = detail::robust_llt(std::move(b));
    const Eigen::VectorXd u = vs * r;
    const Eigen::VectorXd w = lb.matrixL().solve(u);
    const double quad = r.dot(lambda.cwiseInverse().asDiagonal() * r) - w.squaredNorm();
    const double log_det =
        2.0 * lb.matrixLLT().diagonal().array().log().sum() + lambda.array().log().sum();
    return -0.5 * (quad + log_det + n * std::log(2.0 * kPi));
  }

  Eigen::VectorXd cross_to_inducing(const std::vector<double>& x) const {
    Eigen::VectorXd kv(z_.rows());
    for (Eigen::Index i = 0; i < z_.rows(); ++i) {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < z_.cols(); ++c) {
        const double u = (z_(i, c) - x[c]) / hyp_.length_scales[c];
        r2 += u * u;
      }
      const double sr5 = std::sqrt(5.0 * r2);
      kv[i] = hyp_.signal_var * (1.0 + sr5 + 5.0 * r2 / 3.0) * std::exp(-sr5);
    }
    return kv;
  }

  // Caches the factorization used by predict().
  void finalize() {
    const Eigen::Index n = x_.rows();
    const Eigen::VectorXd r = y_.array() - hyp_.mean;
    if (mode_ == GprMode::kFitc) {
      Eigen::MatrixXd kmm = detail::matern_cross(z_, z_, hyp_);
      kmm.diagonal().array() += 1e-10;
      lm_ = detail::robust_llt(std::move(kmm));
      const Eigen::MatrixXd kmn = detail::matern_cross(z_, x_, hyp_);
      const Eigen::MatrixXd v = lm_.matrixL().solve(kmn);
      Eigen::VectorXd lambda(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        lambda[i] = std::max(hyp_.signal_var - v.col(i).squaredNorm(), 0.0) + hyp_.noise_var;
      }
      const Eigen::MatrixXd vs = v * lambda.cwiseInverse().asDiagonal();
      Eigen::MatrixXd b =
          Eigen::MatrixXd::Identity(z_.rows(), z_.rows()) + vs * v.transpose();
      lb_ = detail::robust_llt(std::move(b));
      fitc_c_ = lb_.solve(vs * r);
    } else {
      Eigen::MatrixXd k = detail::matern_cross(x_, x_, hyp_);
      k.diagonal().array() += hyp_.noise_var;
      llt_ = detail::robust_llt(std::move(k));
      alpha_ = llt_.solve(r);
    }
  }

  Eigen::MatrixXd x_;        // training inputs
  Eigen::VectorXd y_raw_;    // original targets
  Eigen::VectorXd y_;        // standardized targets
  double y_mean_ = 0.0;
  double y_std_ = 1.0;
  std::vector<double> input_scale_;
  GprMode mode_ = GprMode::kExact;
  GprHyperparams hyp_;
  bool fallback_ = false;

  Eigen::LLT<Eigen::MatrixXd> llt_;  // exact mode
  Eigen::VectorXd alpha_;

  std::vector<std::size_t> inducing_;
  std::vector<std::size_t> inducing_override_;
  Eigen::MatrixXd z_;  // inducing inputs
  Eigen::LLT<Eigen::MatrixXd> lm_, lb_;
  Eigen::VectorXd fitc_c_;
};

}  // namespace mpfctune

#endif  // MPFCTUNE_GPR_HPP_
