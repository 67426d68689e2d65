#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/Dense>

#include "nvcavity/estimation.hpp"

namespace nvcavity::estimation {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

} // namespace

double FitResult::value(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      return params[i];
    }
  }
  throw InvalidArgument("estimation", "no fitted parameter named " + std::string(name));
}

double FitResult::std_error(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) {
      return i < std_errors.size() ? std_errors[i] : std::numeric_limits<double>::quiet_NaN();
    }
  }
  throw InvalidArgument("estimation", "no fitted parameter named " + std::string(name));
}

std::string FitResult::to_text(std::string_view prefix) const {
  std::ostringstream os;
  const std::string p(prefix);
  for (std::size_t i = 0; i < params.size(); ++i) {
    os << p << names[i] << " = " << format_double(params[i]) << '\n';
    if (i < std_errors.size()) {
      os << p << names[i] << ".std = " << format_double(std_errors[i]) << '\n';
    }
  }
  os << p << "residual_norm = " << format_double(residual_norm) << '\n';
  os << p << "iterations = " << n_iterations << '\n';
  os << p << "converged = " << (converged ? "true" : "false") << '\n';
  for (std::size_t i = 0; i < at_bound.size(); ++i) {
    if (at_bound[i]) {
      os << p << names[i] << ".at_bound = true\n";
    }
  }
  return os.str();
}

std::string FitResult::to_csv() const {
  std::ostringstream os;
  os << "param,value,std\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    os << names[i] << ',' << format_double(params[i]) << ','
       << (i < std_errors.size() ? format_double(std_errors[i]) : std::string("nan")) << '\n';
  }
  return os.str();
}

FitResult least_squares(const Model &model, std::span<const double> x, std::span<const double> y,
                        std::vector<double> init, const Bounds &bounds,
                        std::vector<std::string> names, const LeastSquaresOptions &opts) {
  const std::size_t n = x.size();
  const std::size_t m = init.size();
  if (y.size() != n) {
    throw InvalidArgument("estimation", "x and y lengths differ");
  }
  if (n < m || m == 0) {
    throw InvalidArgument("estimation", "need at least as many points as parameters");
  }
  if (bounds.lower.size() != m || bounds.upper.size() != m) {
    throw InvalidArgument("estimation", "bounds do not match the parameter count");
  }
  if (!opts.weights.empty() && opts.weights.size() != n) {
    throw InvalidArgument("estimation", "weights do not match the data length");
  }
  for (std::size_t j = 0; j < m; ++j) {
    if (!(init[j] >= bounds.lower[j] && init[j] <= bounds.upper[j])) {
      throw InvalidArgument("estimation", "initial parameters must lie within bounds");
    }
  }
  if (names.empty()) {
    for (std::size_t j = 0; j < m; ++j) {
      names.push_back("p" + std::to_string(j));
    }
  }

  VectorXd sqrt_w = VectorXd::Ones(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < opts.weights.size(); ++i) {
    sqrt_w[static_cast<Eigen::Index>(i)] = std::sqrt(opts.weights[i]);
  }

  auto residuals = [&](const std::vector<double> &p) {
    VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      r[static_cast<Eigen::Index>(i)] =
          sqrt_w[static_cast<Eigen::Index>(i)] * (model(x[i], p) - y[i]);
    }
    return r;
  };
  auto jacobian = [&](std::vector<double> p) {
    MatrixXd jac(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < m; ++j) {
      const double pj = p[j];
      const double h = std::max(1e-6, 1e-6 * std::abs(pj));
      p[j] = pj + h;
      const VectorXd rp = residuals(p);
      p[j] = pj - h;
      const VectorXd rm = residuals(p);
      p[j] = pj;
      jac.col(static_cast<Eigen::Index>(j)) = (rp - rm) / (2.0 * h);
    }
    return jac;
  };
  auto project = [&](std::vector<double> &p) {
    for (std::size_t j = 0; j < m; ++j) {
      p[j] = std::clamp(p[j], bounds.lower[j], bounds.upper[j]);
    }
  };

  double y_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y_scale = std::max(y_scale, std::abs(y[i]) * sqrt_w[static_cast<Eigen::Index>(i)]);
  }
  const double exact_tol = 1e-14 * std::max(y_scale, 1e-300) * std::sqrt(static_cast<double>(n));

  std::vector<double> p = std::move(init);
  VectorXd r = residuals(p);
  double cost = r.squaredNorm();
  double lambda = -1.0;
  VectorXd diag_scale = VectorXd::Zero(static_cast<Eigen::Index>(m));

  FitResult result;
  result.names = names;

  // Max residual/column cosine over parameters free to move.
  auto gradient_cosine = [&](const MatrixXd &jac, const VectorXd &g, const std::vector<bool> &free) {
    const double rn = r.norm();
    double worst = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!free[j]) {
        continue;
      }
      const double cn = jac.col(static_cast<Eigen::Index>(j)).norm();
      if (cn > 0.0 && rn > 0.0) {
        worst = std::max(worst, std::abs(g[static_cast<Eigen::Index>(j)]) / (cn * rn));
      }
    }
    return worst;
  };

  int iter = 0;
  bool converged = false;
  MatrixXd jac;
  for (; iter < opts.max_iterations; ++iter) {
    jac = jacobian(p);
    for (std::size_t j = 0; j < m; ++j) {
      if (jac.col(static_cast<Eigen::Index>(j)).norm() == 0.0) {
        throw FitError("estimation", "singular Jacobian: parameter '" + names[j] +
                                         "' does not influence the model");
      }
    }
    const VectorXd g = jac.transpose() * r;
    const MatrixXd jtj = jac.transpose() * jac;

    std::vector<bool> free(m, true);
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if ((p[j] <= bounds.lower[j] && g[jj] > 0.0) || (p[j] >= bounds.upper[j] && g[jj] < 0.0)) {
        free[j] = false;
      }
      diag_scale[jj] = std::max(diag_scale[jj], jtj(jj, jj));
    }
    result.gradient_norm = gradient_cosine(jac, g, free);
    if (r.norm() <= exact_tol || result.gradient_norm <= opts.gradient_tolerance) {
      converged = true;
      break;
    }
    if (lambda < 0.0) {
      lambda = 1e-3;
    }

    std::vector<Eigen::Index> idx;
    for (std::size_t j = 0; j < m; ++j) {
      if (free[j]) {
        idx.push_back(static_cast<Eigen::Index>(j));
      }
    }
    const auto k = static_cast<Eigen::Index>(idx.size());
    MatrixXd a(k, k);
    VectorXd b(k);
    for (Eigen::Index u = 0; u < k; ++u) {
      b[u] = -g[idx[static_cast<std::size_t>(u)]];
      for (Eigen::Index v = 0; v < k; ++v) {
        a(u, v) = jtj(idx[static_cast<std::size_t>(u)], idx[static_cast<std::size_t>(v)]);
      }
    }

    bool stalled = false;
    while (true) {
      MatrixXd damped = a;
      for (Eigen::Index u = 0; u < k; ++u) {
        damped(u, u) += lambda * diag_scale[idx[static_cast<std::size_t>(u)]];
      }
      const VectorXd step = damped.ldlt().solve(b);
      std::vector<double> trial = p;
      for (Eigen::Index u = 0; u < k; ++u) {
        trial[static_cast<std::size_t>(idx[static_cast<std::size_t>(u)])] += step[u];
      }
      project(trial);
      const VectorXd tr = residuals(trial);
      const double tc = tr.squaredNorm();
      if (std::isfinite(tc) && tc < cost) {
        double dp = 0.0, pn = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          dp += (trial[j] - p[j]) * (trial[j] - p[j]);
          pn += p[j] * p[j];
        }
        p = std::move(trial);
        r = tr;
        cost = tc;
        lambda = std::max(lambda / 3.0, 1e-15);
        if (std::sqrt(dp) <= opts.step_tolerance * (std::sqrt(pn) + opts.step_tolerance)) {
          stalled = true;
        }
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e16) {
        stalled = true;
        break;
      }
    }

    if (stalled) {
      jac = jacobian(p);
      const VectorXd g2 = jac.transpose() * r;
      std::vector<bool> free2(m, true);
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if ((p[j] <= bounds.lower[j] && g2[jj] > 0.0) || (p[j] >= bounds.upper[j] && g2[jj] < 0.0)) {
          free2[j] = false;
        }
      }
      result.gradient_norm = gradient_cosine(jac, g2, free2);
      ++iter;
      if (r.norm() <= exact_tol || result.gradient_norm <= 1e-4) {
        converged = true;
        break;
      }
      throw FitError("estimation", "fit stalled away from a stationary point (gradient cosine " +
                                       format_double(result.gradient_norm) + ")");
    }
  }
  if (!converged) {
    throw FitError("estimation", "least squares did not converge within " +
                                     std::to_string(opts.max_iterations) + " iterations");
  }

  result.params = p;
  result.residual_norm = r.norm();
  result.n_iterations = iter;
  result.converged = true;
  result.at_bound.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    result.at_bound[j] = p[j] <= bounds.lower[j] || p[j] >= bounds.upper[j];
  }

  if (n > m) {
    jac = jacobian(p);
    const MatrixXd jtj = jac.transpose() * jac;
    Eigen::FullPivLU<MatrixXd> lu(jtj);
    if (lu.isInvertible()) {
      const double sigma2 = cost / static_cast<double>(n - m);
      const MatrixXd cov = lu.inverse() * sigma2;
      result.std_errors.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        result.std_errors[j] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(j),
                                                           static_cast<Eigen::Index>(j))));
      }
    }
  }
  return result;
}

} // namespace nvcavity::estimation
