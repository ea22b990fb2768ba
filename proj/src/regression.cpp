#include "abc/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abc/error.hpp"

namespace abc {
namespace {

// [1, (s - s_obs) / scale] restricted to coordinates that vary over the
// positively weighted rows. No centering, so the row x = 0 is s = s_obs.
struct Design {
  Eigen::MatrixXd x;
  std::vector<std::size_t> columns;  // summary coordinate of each non-intercept column
  std::vector<double> scale;
};

Design make_design(const Eigen::MatrixXd& summaries, std::span<const double> s_obs, const Eigen::VectorXd& w) {
  const Eigen::Index n = summaries.rows();
  const Eigen::Index d = summaries.cols();
  if (static_cast<std::size_t>(d) != s_obs.size()) throw InvalidArgument("regression: summary length mismatch");
  Design design;
  for (Eigen::Index j = 0; j < d; ++j) {
    double first = std::numeric_limits<double>::quiet_NaN();
    bool varies = false;
    double sumsq = 0.0;
    std::size_t used = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(w[i] > 0.0)) continue;
      const double diff = summaries(i, j) - s_obs[static_cast<std::size_t>(j)];
      if (used == 0) first = diff;
      varies = varies || diff != first;
      sumsq += diff * diff;
      ++used;
    }
    if (!varies) continue;
    design.columns.push_back(static_cast<std::size_t>(j));
    design.scale.push_back(std::sqrt(sumsq / static_cast<double>(used)));
  }
  design.x.resize(n, static_cast<Eigen::Index>(design.columns.size()) + 1);
  design.x.col(0).setOnes();
  for (std::size_t c = 0; c < design.columns.size(); ++c) {
    const auto j = static_cast<Eigen::Index>(design.columns[c]);
    design.x.col(static_cast<Eigen::Index>(c) + 1) =
        (summaries.col(j).array() - s_obs[design.columns[c]]) / design.scale[c];
  }
  return design;
}

std::size_t positive_count(const Eigen::VectorXd& w) {
  return static_cast<std::size_t>((w.array() > 0.0).count());
}

constexpr double kEdge = 1e-12;

double forward(double theta, const ParamInfo& p) {
  switch (p.transform) {
    case Transform::none:
      return theta;
    case Transform::log:
      return std::log(std::max(theta - p.lower, std::numeric_limits<double>::min()));
    case Transform::logit: {
      const double u = std::clamp((theta - p.lower) / (p.upper - p.lower), kEdge, 1.0 - kEdge);
      return std::log(u / (1.0 - u));
    }
  }
  return theta;
}

double backward(double y, const ParamInfo& p) {
  switch (p.transform) {
    case Transform::none:
      return y;
    case Transform::log:
      return p.lower + std::exp(y);
    case Transform::logit:
      return p.lower + (p.upper - p.lower) / (1.0 + std::exp(-y));
  }
  return y;
}

void check_transform(const ParamInfo& p) {
  if (p.transform == Transform::log && !std::isfinite(p.lower)) {
    throw InvalidArgument("parameter '" + p.name + "': log transform needs a finite lower bound");
  }
  if (p.transform == Transform::logit && !(std::isfinite(p.lower) && std::isfinite(p.upper) && p.upper > p.lower)) {
    throw InvalidArgument("parameter '" + p.name + "': logit transform needs finite bounds");
  }
}

// Weighted least squares via column-pivoting QR on sqrt(w) X. Returns false
// when the design is rank-deficient.
bool weighted_lsq(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                  Eigen::VectorXd& beta) {
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * x;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) return false;
  beta = qr.solve(Eigen::VectorXd(sw.cwiseProduct(y)));
  return beta.allFinite();
}

}  // namespace

std::vector<double> epanechnikov_weights(std::span<const double> distances, double epsilon) {
  std::vector<double> w(distances.size(), 1.0);
  if (std::isinf(epsilon)) return w;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (distances[i] == 0.0) continue;
    const double r = distances[i] / epsilon;
    w[i] = std::max(0.0, 1.0 - r * r);
  }
  return w;
}

AdjustedParams local_linear_adjust(const std::vector<ParamVector>& theta, const Eigen::MatrixXd& summaries,
                                   std::span<const double> s_obs, std::span<const double> distances, double epsilon,
                                   std::span<const ParamInfo> params, const RegressionOptions& options) {
  const std::size_t n = theta.size();
  if (static_cast<std::size_t>(summaries.rows()) != n || distances.size() != n) {
    throw InvalidArgument("local_linear_adjust: inconsistent sample counts");
  }
  for (const auto& t : theta) {
    if (t.size() != params.size()) throw InvalidArgument("local_linear_adjust: parameter length mismatch");
  }
  for (const auto& p : params) check_transform(p);

  AdjustedParams out;
  out.theta_star = theta;
  const std::vector<double> wv = epanechnikov_weights(distances, epsilon);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(n));
  const auto d = static_cast<std::size_t>(summaries.cols());
  const std::size_t used = positive_count(w);

  const Design design = make_design(summaries, s_obs, w);
  const auto k = design.x.cols();

  for (std::size_t p = 0; p < params.size(); ++p) {
    ParamFit fit;
    fit.param = params[p].name;
    fit.coefficients.assign(d + 1, 0.0);
    if (used <= d + 1) {
      fit.warning = "insufficient samples for regression (" + std::to_string(used) + " weighted points)";
      out.diagnostics.push_back(std::move(fit));
      continue;
    }

    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) y[static_cast<Eigen::Index>(i)] = forward(theta[i][p], params[p]);

    Eigen::VectorXd beta;
    if (!weighted_lsq(design.x, y, w, beta)) {
      fit.warning = "rank-deficient design; parameter left unadjusted";
      out.diagnostics.push_back(std::move(fit));
      continue;
    }

    const Eigen::VectorXd fitted = design.x * beta;
    const Eigen::VectorXd resid = y - fitted;
    Eigen::VectorXd adjusted = y - (fitted.array() - beta[0]).matrix();

    if (options.heteroskedastic) {
      Eigen::VectorXd log_r2(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < log_r2.size(); ++i) {
        log_r2[i] = std::log(std::max(resid[i] * resid[i], std::numeric_limits<double>::min()));
      }
      Eigen::VectorXd gamma;
      if (weighted_lsq(design.x, log_r2, w, gamma)) {
        const Eigen::VectorXd log_sd = 0.5 * (design.x * gamma);
        const double log_sd_obs = 0.5 * gamma[0];
        adjusted = (beta[0] + ((log_sd_obs - log_sd.array()).exp() * resid.array())).matrix();
      } else {
        fit.warning = "variance regression rank-deficient; homoskedastic adjustment used";
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      out.theta_star[i][p] = backward(adjusted[static_cast<Eigen::Index>(i)], params[p]);
    }
    fit.adjusted = true;
    fit.coefficients[0] = beta[0];
    for (Eigen::Index c = 1; c < k; ++c) {
      const std::size_t col = static_cast<std::size_t>(c - 1);
      fit.coefficients[design.columns[col] + 1] = beta[c] / design.scale[col];
    }
    fit.residual_scale = std::sqrt((w.array() * resid.array().square()).sum() / w.sum());
    out.diagnostics.push_back(std::move(fit));
  }
  return out;
}

AdjustedModelProbs multinomial_logit_adjust(std::span<const ModelId> ids, const Eigen::MatrixXd& summaries,
                                            std::span<const double> s_obs, std::span<const double> distances,
                                            double epsilon, std::size_t n_models,
                                            const RegressionOptions& options) {
  const std::size_t n = ids.size();
  if (static_cast<std::size_t>(summaries.rows()) != n || distances.size() != n) {
    throw InvalidArgument("multinomial_logit_adjust: inconsistent sample counts");
  }
  if (n == 0) throw InvalidArgument("multinomial_logit_adjust: no samples");
  for (ModelId id : ids) {
    if (id < 1 || static_cast<std::size_t>(id) > n_models) throw InvalidArgument("multinomial_logit_adjust: bad id");
  }

  AdjustedModelProbs out;
  const auto fallback = [&](std::string why) {
    out.probs.assign(n_models, 0.0);
    for (ModelId id : ids) out.probs[static_cast<std::size_t>(id - 1)] += 1.0;
    for (auto& p : out.probs) p /= static_cast<double>(n);
    out.fallback = true;
    out.warning = std::move(why);
    return out;
  };

  const std::vector<double> wv = epanechnikov_weights(distances, epsilon);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Eigen::Index>(n));

  std::vector<double> class_weight(n_models, 0.0);
  for (std::size_t i = 0; i < n; ++i) class_weight[static_cast<std::size_t>(ids[i] - 1)] += wv[i];
  std::vector<std::size_t> present;
  for (std::size_t m = 0; m < n_models; ++m) {
    if (class_weight[m] > 0.0) present.push_back(m);
  }
  if (present.size() < 2) return fallback("fewer than two models present");

  std::vector<int> label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::find(present.begin(), present.end(), static_cast<std::size_t>(ids[i] - 1));
    if (it != present.end()) label[i] = static_cast<int>(it - present.begin());
  }

  const Design design = make_design(summaries, s_obs, w);
  const Eigen::MatrixXd& x = design.x;
  const Eigen::Index k = x.cols();
  const auto classes = static_cast<Eigen::Index>(present.size());
  const Eigen::Index dim = k * (classes - 1);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index c = 1; c < classes; ++c) {
    beta[(c - 1) * k] = std::log(class_weight[present[static_cast<std::size_t>(c)]] / class_weight[present[0]]);
  }

  Eigen::MatrixXd prob(static_cast<Eigen::Index>(n), classes);
  const auto evaluate = [&](const Eigen::VectorXd& b) {
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      double max_eta = 0.0;
      Eigen::VectorXd eta(classes);
      eta[0] = 0.0;
      for (Eigen::Index c = 1; c < classes; ++c) {
        eta[c] = x.row(i).dot(b.segment((c - 1) * k, k));
        max_eta = std::max(max_eta, eta[c]);
      }
      const Eigen::VectorXd e = (eta.array() - max_eta).exp();
      const double total = e.sum();
      prob.row(i) = e / total;
      if (w[i] > 0.0 && label[static_cast<std::size_t>(i)] >= 0) {
        loglik += w[i] * (eta[label[static_cast<std::size_t>(i)]] - max_eta - std::log(total));
      }
    }
    return loglik;
  };

  constexpr double kSeparationBound = 50.0;
  double loglik = evaluate(beta);
  bool converged = false;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      if (!(w[i] > 0.0)) continue;
      const Eigen::VectorXd xi = x.row(i).transpose();
      const Eigen::MatrixXd xx = w[i] * xi * xi.transpose();
      for (Eigen::Index c = 1; c < classes; ++c) {
        const double y = label[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
        grad.segment((c - 1) * k, k) += w[i] * (y - prob(i, c)) * xi;
        for (Eigen::Index c2 = 1; c2 < classes; ++c2) {
          const double v = prob(i, c) * ((c == c2 ? 1.0 : 0.0) - prob(i, c2));
          hess.block((c - 1) * k, (c2 - 1) * k, k, k) += v * xx;
        }
      }
    }
    hess.diagonal().array() += options.ridge;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) break;

    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    double next_loglik = evaluate(next);
    for (int halving = 0; halving < 30 && next_loglik < loglik - 1e-12 * std::fabs(loglik); ++halving) {
      t *= 0.5;
      next = beta + t * step;
      next_loglik = evaluate(next);
    }
    const double change = (t * step).cwiseAbs().maxCoeff();
    beta = next;
    loglik = next_loglik;
    if (beta.cwiseAbs().maxCoeff() > kSeparationBound) {
      out.iterations = iter + 1;
      return fallback("complete separation detected");
    }
    if (change < options.tolerance) {
      converged = true;
      ++iter;
      break;
    }
  }
  out.iterations = iter;
  if (!converged) return fallback("IRLS did not converge in " + std::to_string(options.max_iterations) + " iterations");

  // Fitted probabilities at x = 0, i.e. s = s_obs: softmax of the intercepts.
  Eigen::VectorXd eta(classes);
  eta[0] = 0.0;
  for (Eigen::Index c = 1; c < classes; ++c) eta[c] = beta[(c - 1) * k];
  const Eigen::VectorXd e = (eta.array() - eta.maxCoeff()).exp();
  out.probs.assign(n_models, 0.0);
  for (Eigen::Index c = 0; c < classes; ++c) out.probs[present[static_cast<std::size_t>(c)]] = e[c] / e.sum();
  return out;
}

}  // namespace abc
