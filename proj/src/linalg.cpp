#include "covalue/linalg.hpp"

#include <cmath>
#include <string>

#include "covalue/errors.hpp"

namespace covalue {

namespace {

bool try_llt(const Eigen::MatrixXd& a, Eigen::MatrixXd& lower) {
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    lower = llt.matrixL();
    // Eigen can report success with a zero/negative pivot squeaking
    // through on some near-singular inputs; reject those too so the
    // jitter path handles them uniformly.
    for (Eigen::Index i = 0; i < lower.rows(); ++i) {
        if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
    }
    return true;
}

}  // namespace

Eigen::MatrixXd cholesky_psd(Eigen::MatrixXd a, const char* what, double max_jitter) {
    if (a.rows() != a.cols()) {
        throw NumericError(std::string(what) + ": matrix is not square");
    }
    if (a.rows() == 0) return Eigen::MatrixXd(0, 0);
    if (!a.allFinite()) {
        throw NumericError(std::string(what) + ": matrix has non-finite entries");
    }

    Eigen::MatrixXd lower;
    if (try_llt(a, lower)) return lower;

    const double scale = a.diagonal().mean();
    const double base = scale > 0.0 ? scale : 1.0;
    for (double jitter = 1e-10; jitter <= max_jitter * 1.0000001; jitter *= 10.0) {
        Eigen::MatrixXd bumped = a;
        bumped.diagonal().array() += jitter * base;
        if (try_llt(bumped, lower)) return lower;
    }
    throw NumericError(std::string(what) + ": Cholesky failed even after diagonal jitter up to " +
                       std::to_string(max_jitter));
}

double log_det_cholesky(const Eigen::MatrixXd& lower) {
    return 2.0 * lower.diagonal().array().log().sum();
}

double log_det_psd(Eigen::MatrixXd a, const char* what) {
    return log_det_cholesky(cholesky_psd(std::move(a), what));
}

}  // namespace covalue
