#include "rex/linalg.hpp"

#include <cmath>

#include "rex/core.hpp"

namespace rex {

std::optional<Mat> cholesky(const Mat& a) {
  const std::size_t n = a.rows();
  Mat l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
    if (!(diag > 0.0)) return std::nullopt;
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      l(i, j) = sum / l(j, j);
    }
  }
  return l;
}

std::vector<double> cholesky_solve(const Mat& l, std::vector<double> b) {
  const std::size_t n = l.rows();
  // Forward substitution L y = b.
  for (std::size_t i = 0; i < n; ++i) {
    double sum = b[i];
    for (std::size_t k = 0; k < i; ++k) sum -= l(i, k) * b[k];
    b[i] = sum / l(i, i);
  }
  // Back substitution L^T x = y.
  for (std::size_t i = n; i-- > 0;) {
    double sum = b[i];
    for (std::size_t k = i + 1; k < n; ++k) sum -= l(k, i) * b[k];
    b[i] = sum / l(i, i);
  }
  return b;
}

std::optional<std::vector<double>> solve_spd(const Mat& a,
                                             const std::vector<double>& b) {
  auto l = cholesky(a);
  if (!l) return std::nullopt;
  return cholesky_solve(*l, b);
}

bool is_symmetric(const Mat& a, double tol) {
  if (a.rows() != a.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      if (std::abs(a(i, j) - a(j, i)) > tol) return false;
    }
  }
  return true;
}

std::vector<double> gaussian_conditional_fill(const std::vector<double>& mean,
                                              const Mat& cov,
                                              std::span<const double> x,
                                              const std::vector<int>& observed,
                                              Mat* cond_cov) {
  const std::size_t d = mean.size();
  std::vector<bool> is_obs(d, false);
  for (int i : observed) is_obs[static_cast<std::size_t>(i)] = true;
  std::vector<int> hidden;
  for (std::size_t i = 0; i < d; ++i) {
    if (!is_obs[i]) hidden.push_back(static_cast<int>(i));
  }

  std::vector<double> out(x.begin(), x.end());
  const std::size_t no = observed.size();
  const std::size_t nh = hidden.size();
  if (nh == 0) {
    if (cond_cov) *cond_cov = Mat(0, 0);
    return out;
  }
  if (no == 0) {
    for (std::size_t k = 0; k < nh; ++k) {
      out[static_cast<std::size_t>(hidden[k])] =
          mean[static_cast<std::size_t>(hidden[k])];
    }
    if (cond_cov) {
      Mat c(nh, nh);
      for (std::size_t i = 0; i < nh; ++i) {
        for (std::size_t j = 0; j < nh; ++j) {
          c(i, j) = cov(static_cast<std::size_t>(hidden[i]),
                        static_cast<std::size_t>(hidden[j]));
        }
      }
      *cond_cov = c;
    }
    return out;
  }

  Mat cov_oo(no, no);
  for (std::size_t i = 0; i < no; ++i) {
    for (std::size_t j = 0; j < no; ++j) {
      cov_oo(i, j) = cov(static_cast<std::size_t>(observed[i]),
                         static_cast<std::size_t>(observed[j]));
    }
  }
  auto l = cholesky(cov_oo);
  if (!l) {
    throw NotPositiveDefinite("observed covariance block is not PD");
  }

  std::vector<double> delta(no);
  for (std::size_t i = 0; i < no; ++i) {
    delta[i] = x[static_cast<std::size_t>(observed[i])] -
               mean[static_cast<std::size_t>(observed[i])];
  }
  const std::vector<double> alpha = cholesky_solve(*l, delta);

  for (std::size_t k = 0; k < nh; ++k) {
    const std::size_t h = static_cast<std::size_t>(hidden[k]);
    double v = mean[h];
    for (std::size_t j = 0; j < no; ++j) {
      v += cov(h, static_cast<std::size_t>(observed[j])) * alpha[j];
    }
    out[h] = v;
  }

  if (cond_cov) {
    // Cov_hh - Cov_ho Cov_oo^{-1} Cov_oh, column by column.
    Mat c(nh, nh);
    for (std::size_t j = 0; j < nh; ++j) {
      std::vector<double> col(no);
      for (std::size_t i = 0; i < no; ++i) {
        col[i] = cov(static_cast<std::size_t>(observed[i]),
                     static_cast<std::size_t>(hidden[j]));
      }
      const std::vector<double> w = cholesky_solve(*l, col);
      for (std::size_t i = 0; i < nh; ++i) {
        double v = cov(static_cast<std::size_t>(hidden[i]),
                       static_cast<std::size_t>(hidden[j]));
        for (std::size_t k2 = 0; k2 < no; ++k2) {
          v -= cov(static_cast<std::size_t>(hidden[i]),
                   static_cast<std::size_t>(observed[k2])) *
               w[k2];
        }
        c(i, j) = v;
      }
    }
    *cond_cov = c;
  }
  return out;
}

}  // namespace rex
