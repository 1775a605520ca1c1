#pragma once

// Numerical kernels: complex sparse LU, real SPD Cholesky (sparse and dense),
// restarted GMRES over an abstract operator, dense singular value and
// generalized eigenvalue diagnostics.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

namespace helmdd {

using Complex = std::complex<double>;
using SparseMatrixXcd = Eigen::SparseMatrix<Complex>;
using SparseMatrixXd = Eigen::SparseMatrix<double>;

namespace linsolve {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Complex sparse LU; reusable and side-effect free after construction.
class SparseLu {
 public:
  explicit SparseLu(const SparseMatrixXcd& matrix) {
    lu_.compute(matrix);
    if (lu_.info() != Eigen::Success)
      throw SingularMatrixError("sparse LU factorization failed (singular matrix?)");
  }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const { return lu_.solve(b); }
  Eigen::Index rows() const { return lu_.rows(); }

 private:
  Eigen::SparseLU<SparseMatrixXcd, Eigen::COLAMDOrdering<int>> lu_;
};

/// Real SPD sparse Cholesky.
class SpdCholeskySparse {
 public:
  explicit SpdCholeskySparse(const SparseMatrixXd& matrix) {
    llt_.compute(matrix);
    if (llt_.info() != Eigen::Success)
      throw SingularMatrixError("sparse Cholesky failed: matrix is not SPD");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }

 private:
  Eigen::SimplicialLLT<SparseMatrixXd> llt_;
};

/// Real SPD dense Cholesky; solves complex right-hand sides componentwise.
class SpdCholeskyDense {
 public:
  SpdCholeskyDense() = default;
  explicit SpdCholeskyDense(const Eigen::MatrixXd& matrix) : llt_(matrix) {
    if (llt_.info() != Eigen::Success)
      throw SingularMatrixError("dense Cholesky failed: matrix is not SPD");
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }

  Eigen::VectorXcd solve(const Eigen::VectorXcd& b) const {
    Eigen::VectorXcd x(b.size());
    x.real() = llt_.solve(Eigen::VectorXd(b.real()));
    x.imag() = llt_.solve(Eigen::VectorXd(b.imag()));
    return x;
  }

  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Real symmetric block applied to a complex vector without promoting the matrix.
inline Eigen::VectorXcd apply_real(const Eigen::MatrixXd& m, const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(m.rows());
  out.real() = m * Eigen::VectorXd(v.real());
  out.imag() = m * Eigen::VectorXd(v.imag());
  return out;
}

using Operator = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

// Called after each inner iteration with (global iteration, current iterate,
// recurrence residual vector); returning true stops the solver.
using GmresCallback = std::function<bool(int, const Eigen::VectorXcd&, const Eigen::VectorXcd&)>;

struct GmresResult {
  Eigen::VectorXcd x;
  std::vector<double> residual_history;  // recurrence residual norm per iteration
  int iterations = 0;
  bool converged = false;   // reached tol_res, or stopped by the callback
  bool stagnated = false;   // a full restart cycle made no progress
};

/// Restarted GMRES with modified Gram-Schmidt Arnoldi and Givens rotations.
/// Pass tol_res = 0 to drive stopping entirely through the callback.
inline GmresResult gmres(const Operator& op, const Eigen::VectorXcd& b, int restart,
                         double tol_res, int max_iter, const GmresCallback& callback = {}) {
  if (restart < 1) throw std::invalid_argument("gmres: restart must be >= 1");
  const Eigen::Index n = b.size();
  GmresResult result;
  result.x = Eigen::VectorXcd::Zero(n);

  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    result.converged = true;
    return result;
  }

  const int m = restart;
  Eigen::MatrixXcd V(n, m + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
  // Rotation i maps [h_i; h_{i+1}] to [c h_i + s h_{i+1}; -conj(s) h_i + c h_{i+1}]
  // with c real (LAPACK convention).
  Eigen::VectorXd cs(m);
  Eigen::VectorXcd sn(m), g(m + 1);

  auto iterate_from = [&](int k) {
    // x = x0 + V_k y with R y = g, R the rotated (triangular) Hessenberg block.
    Eigen::VectorXcd y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    return Eigen::VectorXcd(result.x + V.leftCols(k) * y);
  };

  int total_iter = 0;
  while (total_iter < max_iter) {
    const Eigen::VectorXcd r = b - op(result.x);
    const double beta = r.norm();
    if (beta <= tol_res * bnorm) {
      result.converged = true;
      break;
    }
    const double cycle_start_res = beta;
    V.col(0) = r / beta;
    g.setZero();
    g(0) = beta;

    int k = 0;
    bool happy = false;
    for (; k < m && total_iter < max_iter; ++k) {
      Eigen::VectorXcd w = op(V.col(k));
      for (int i = 0; i <= k; ++i) {
        H(i, k) = V.col(i).dot(w);  // conjugates V
        w -= H(i, k) * V.col(i);
      }
      const double w_norm = w.norm();
      H(k + 1, k) = w_norm;
      if (w_norm > 0.0) V.col(k + 1) = w / w_norm;

      for (int i = 0; i < k; ++i) {
        const Complex tmp = cs(i) * H(i, k) + sn(i) * H(i + 1, k);
        H(i + 1, k) = -std::conj(sn(i)) * H(i, k) + cs(i) * H(i + 1, k);
        H(i, k) = tmp;
      }
      // New rotation eliminating the (real, nonnegative) subdiagonal w_norm.
      const Complex a = H(k, k);
      const double abs_a = std::abs(a);
      const double t = std::sqrt(abs_a * abs_a + w_norm * w_norm);
      if (t == 0.0) {
        cs(k) = 1.0;
        sn(k) = 0.0;
      } else if (abs_a == 0.0) {
        cs(k) = 0.0;
        sn(k) = 1.0;
        H(k, k) = w_norm;
      } else {
        const Complex phase = a / abs_a;
        cs(k) = abs_a / t;
        sn(k) = phase * (w_norm / t);
        H(k, k) = phase * t;
      }
      H(k + 1, k) = 0.0;
      const Complex g_hi = -std::conj(sn(k)) * g(k);
      g(k) = cs(k) * g(k);
      g(k + 1) = g_hi;

      ++total_iter;
      const double res = std::abs(g(k + 1));
      result.residual_history.push_back(res);

      if (callback) {
        // Residual vector of the current iterate: beta e1 - Hbar y = Q^* (g_tail),
        // obtained by unwinding the rotations applied so far.
        Eigen::VectorXcd z = Eigen::VectorXcd::Zero(k + 2);
        z(k + 1) = g(k + 1);
        for (int i = k; i >= 0; --i) {
          const Complex zi = cs(i) * z(i) - sn(i) * z(i + 1);
          z(i + 1) = std::conj(sn(i)) * z(i) + cs(i) * z(i + 1);
          z(i) = zi;
        }
        const Eigen::VectorXcd r_vec = V.leftCols(k + 2) * z;
        if (callback(total_iter, iterate_from(k + 1), r_vec)) {
          result.x = iterate_from(k + 1);
          result.iterations = total_iter;
          result.converged = true;
          return result;
        }
      }
      if (res <= tol_res * bnorm || w_norm == 0.0) {
        happy = true;
        ++k;
        break;
      }
    }
    if (k > 0) result.x = iterate_from(k);
    result.iterations = total_iter;
    const double cycle_end_res = result.residual_history.empty() ? beta : result.residual_history.back();
    if (happy || cycle_end_res <= tol_res * bnorm) {
      result.converged = true;
      break;
    }
    if (total_iter >= max_iter) break;
    if (cycle_end_res >= cycle_start_res * (1.0 - 1e-12)) {
      result.stagnated = true;
      break;
    }
  }
  result.iterations = total_iter;
  return result;
}

/// Smallest singular value of a dense complex matrix.
inline double dense_min_singular_value(const Eigen::MatrixXcd& m) {
  if (m.rows() <= 64)
    return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues().minCoeff();
  return Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues().minCoeff();
}

/// Largest singular value of a dense complex matrix.
inline double dense_max_singular_value(const Eigen::MatrixXcd& m) {
  if (m.rows() <= 64)
    return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues().maxCoeff();
  return Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues().maxCoeff();
}

/// Extreme generalized eigenvalues of the SPD pencil (A, B).
inline std::pair<double, double> dense_sym_generalized_eigs(const Eigen::MatrixXd& a,
                                                            const Eigen::MatrixXd& b) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, b);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("generalized eigensolver failed");
  const auto& values = solver.eigenvalues();
  return {values.minCoeff(), values.maxCoeff()};
}

}  // namespace linsolve

}  // namespace helmdd
