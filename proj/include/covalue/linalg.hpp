#pragma once

#include <Eigen/Dense>

namespace covalue {

// Cholesky factor of a symmetric positive (semi)definite matrix.  If the
// plain factorization fails, adds jitter * mean(diag) to the diagonal,
// starting at 1e-10 and escalating tenfold up to max_jitter before giving
// up with NumericError.  Returns the lower factor L with A + jitter*I = LL'.
Eigen::MatrixXd cholesky_psd(Eigen::MatrixXd a, const char* what, double max_jitter = 1e-6);

// 2 * sum(log(diag(L))), i.e. log det(LL').
double log_det_cholesky(const Eigen::MatrixXd& lower);

// log det(A) for symmetric positive definite A, via cholesky_psd.
double log_det_psd(Eigen::MatrixXd a, const char* what);

}  // namespace covalue
