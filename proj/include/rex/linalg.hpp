#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rex {

// Dense square symmetric matrices are all this library needs; sizes stay at
// desk scale (d <= 63), so a flat row-major buffer is enough.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a_[i * cols_ + j];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix,
// or nullopt when a pivot is not strictly positive.
std::optional<Mat> cholesky(const Mat& a);

// Solves L L^T x = b given the factor from cholesky().
std::vector<double> cholesky_solve(const Mat& l, std::vector<double> b);

// Solves the SPD system a x = b; nullopt when a is not positive definite.
std::optional<std::vector<double>> solve_spd(const Mat& a,
                                             const std::vector<double>& b);

bool is_symmetric(const Mat& a, double tol);

// Fills the coordinates outside `observed` with the Gaussian conditional mean
// mu_u + Cov_uo Cov_oo^{-1} (x_o - mu_o); coordinates in `observed` keep their
// value from x. When cond_cov is non-null it receives the conditional
// covariance of the unobserved block. Throws NotPositiveDefinite if the
// observed block is not positive definite.
std::vector<double> gaussian_conditional_fill(const std::vector<double>& mean,
                                              const Mat& cov,
                                              std::span<const double> x,
                                              const std::vector<int>& observed,
                                              Mat* cond_cov = nullptr);

}  // namespace rex
