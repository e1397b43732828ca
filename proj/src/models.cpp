#include "covalue/models.hpp"

#include <cmath>
#include <exception>
#include <string>

#include "covalue/errors.hpp"
#include "covalue/linalg.hpp"

namespace covalue {

namespace {

void validate_noise(const NoiseVector& noise, Eigen::Index rows) {
    if (noise.size() != rows) {
        throw ConfigError("noise vector has " + std::to_string(noise.size()) +
                          " entries for " + std::to_string(rows) + " training rows");
    }
    for (Eigen::Index i = 0; i < noise.size(); ++i) {
        if (!(noise[i] > 0.0) || !std::isfinite(noise[i])) {
            throw ConfigError("noise variances must be positive and finite");
        }
    }
}

void validate_positive_noise_variance(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw ConfigError("model noise variance must be positive and finite");
    }
}

}  // namespace

double ModelSpec::noise_variance() const {
    return std::visit([](const auto& m) { return m.noise_variance; }, model);
}

Eigen::Index ModelSpec::input_dim() const {
    return std::visit(
        [](const auto& m) -> Eigen::Index {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BlrModel>) {
                return m.prior_mean.size();
            } else {
                return m.kernel.dim();
            }
        },
        model);
}

const char* ModelSpec::kind() const {
    return std::visit(
        [](const auto& m) -> const char* {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BlrModel>) {
                return "blr";
            } else if constexpr (std::is_same_v<T, GpModel>) {
                return "gp";
            } else {
                return "dtc";
            }
        },
        model);
}

void ModelSpec::validate() const {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            validate_positive_noise_variance(m.noise_variance);
            if constexpr (std::is_same_v<T, BlrModel>) {
                const Eigen::Index d = m.prior_mean.size();
                if (d < 1) throw ConfigError("BLR prior needs at least one dimension");
                if (m.prior_cov.rows() != d || m.prior_cov.cols() != d) {
                    throw ConfigError("BLR prior covariance shape does not match prior mean");
                }
                if (!m.prior_mean.allFinite() || !m.prior_cov.allFinite()) {
                    throw ConfigError("BLR prior contains non-finite values");
                }
                const double scale = m.prior_cov.cwiseAbs().maxCoeff();
                if ((m.prior_cov - m.prior_cov.transpose()).cwiseAbs().maxCoeff() >
                    1e-8 * std::max(1.0, scale)) {
                    throw ConfigError("BLR prior covariance is not symmetric");
                }
                cholesky_psd(m.prior_cov, "BLR prior covariance", 1e-8);
            } else if constexpr (std::is_same_v<T, GpModel>) {
                m.kernel.validate();
            } else {
                m.kernel.validate();
                if (m.inducing_inputs.rows() < 1) {
                    throw ConfigError("DTC model needs at least one inducing input");
                }
                if (!m.inducing_inputs.allFinite()) {
                    throw ConfigError("DTC inducing inputs contain non-finite values");
                }
                if (m.inducing_inputs.cols() != m.kernel.dim()) {
                    throw ConfigError("DTC inducing inputs do not match the kernel dimension");
                }
            }
        },
        model);
}

NoiseVector homoscedastic_noise(const ModelSpec& model, Eigen::Index rows) {
    return NoiseVector::Constant(rows, model.noise_variance());
}

namespace {

double clamp_gain(double half_log_det) {
    if (half_log_det < 0.0) {
        if (half_log_det < -1e-9) {
            throw NumericError("information gain came out " + std::to_string(half_log_det) +
                               "; matrix conditioning is beyond repair");
        }
        return 0.0;
    }
    return half_log_det;
}

double ig_blr(const BlrModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& dinv_sqrt) {
    const Eigen::MatrixXd l0 = cholesky_psd(m.prior_cov, "BLR prior covariance");
    // S = Kn^{-1/2} X L0;  det(I + Sigma0 X' Kn^-1 X) = det(I + S'S).
    const Eigen::MatrixXd s = dinv_sqrt.asDiagonal() * (x * l0);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(x.cols(), x.cols());
    gram.noalias() += s.transpose() * s;
    return 0.5 * log_det_psd(std::move(gram), "BLR information matrix");
}

double ig_gp(const GpModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& dinv_sqrt) {
    const Eigen::MatrixXd k = kernel_matrix(m.kernel, x, x);
    Eigen::MatrixXd b = dinv_sqrt.asDiagonal() * k * dinv_sqrt.asDiagonal();
    b.diagonal().array() += 1.0;
    return 0.5 * log_det_psd(std::move(b), "GP information matrix");
}

double ig_dtc(const DtcModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& dinv_sqrt) {
    const Eigen::MatrixXd luu =
        cholesky_psd(kernel_matrix(m.kernel, m.inducing_inputs, m.inducing_inputs),
                     "DTC inducing covariance");
    // S = Luu^-1 Kux Kn^{-1/2} is u x m; det(I_m + S'S) = det(I_u + SS').
    Eigen::MatrixXd s = kernel_matrix(m.kernel, m.inducing_inputs, x) * dinv_sqrt.asDiagonal();
    luu.triangularView<Eigen::Lower>().solveInPlace(s);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(s.rows(), s.rows());
    gram.noalias() += s * s.transpose();
    return 0.5 * log_det_psd(std::move(gram), "DTC information matrix");
}

}  // namespace

double information_gain(const ModelSpec& model, const Eigen::MatrixXd& inputs,
                        const NoiseVector& noise) {
    if (inputs.rows() == 0) return 0.0;
    if (!inputs.allFinite()) throw ConfigError("training inputs contain non-finite values");
    if (inputs.cols() != model.input_dim()) {
        throw ConfigError("training inputs have dimension " + std::to_string(inputs.cols()) +
                          " but the model expects " + std::to_string(model.input_dim()));
    }
    validate_noise(noise, inputs.rows());
    const Eigen::VectorXd dinv_sqrt = noise.array().rsqrt();

    const double gain = std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BlrModel>) {
                return ig_blr(m, inputs, dinv_sqrt);
            } else if constexpr (std::is_same_v<T, GpModel>) {
                return ig_gp(m, inputs, dinv_sqrt);
            } else {
                return ig_dtc(m, inputs, dinv_sqrt);
            }
        },
        model.model);
    return clamp_gain(gain);
}

double information_gain(const ModelSpec& model, const Eigen::MatrixXd& inputs) {
    validate_positive_noise_variance(model.noise_variance());
    return information_gain(model, inputs, homoscedastic_noise(model, inputs.rows()));
}

namespace {

CharacteristicFunction coalition_values_impl(const ModelSpec& model,
                                             std::span<const Dataset> parties, bool parallel) {
    const int n = static_cast<int>(parties.size());
    if (n < 1 || n > kMaxExactParties) {
        throw ConfigError("coalition enumeration supports 1.." +
                          std::to_string(kMaxExactParties) + " parties");
    }
    model.validate();
    for (const auto& p : parties) p.validate();

    const auto count = std::size_t{1} << n;
    std::vector<double> values(count, 0.0);
    std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::int64_t mask = 1; mask < static_cast<std::int64_t>(count); ++mask) {
        try {
            const Dataset joined =
                concat_coalition(parties, static_cast<CoalitionMask>(mask));
            values[mask] = information_gain(model, joined.inputs);
        } catch (...) {
#pragma omp critical(covalue_coalition_values_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    return CharacteristicFunction(n, std::move(values));
}

}  // namespace

CharacteristicFunction coalition_values(const ModelSpec& model,
                                        std::span<const Dataset> parties) {
    return coalition_values_impl(model, parties, true);
}

CharacteristicFunction coalition_values_serial(const ModelSpec& model,
                                               std::span<const Dataset> parties) {
    return coalition_values_impl(model, parties, false);
}

namespace {

PredictiveDistribution predict_blr(const BlrModel& m, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& dinv,
                                   const Eigen::MatrixXd& xs) {
    const Eigen::Index d = m.prior_mean.size();
    const Eigen::MatrixXd l0 = cholesky_psd(m.prior_cov, "BLR prior covariance");

    // A = I + L0' X' Kn^-1 X L0, so Sigma_n = L0 A^-1 L0'.
    const Eigen::MatrixXd xl = x * l0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    a.noalias() += xl.transpose() * dinv.asDiagonal() * xl;
    const Eigen::MatrixXd la = cholesky_psd(std::move(a), "BLR posterior information");

    // c = L0' (Sigma0^-1 mu0 + X' Kn^-1 y) = L0^-1 mu0 + (X L0)' Kn^-1 y.
    Eigen::VectorXd c = l0.triangularView<Eigen::Lower>().solve(m.prior_mean);
    c.noalias() += xl.transpose() * (dinv.asDiagonal() * y);
    Eigen::VectorXd w = la.triangularView<Eigen::Lower>().solve(c);
    la.transpose().triangularView<Eigen::Upper>().solveInPlace(w);

    PredictiveDistribution out;
    out.means.noalias() = xs * (l0 * w);
    // var_i = || La^-1 L0' xs_i ||^2 + sigma^2.
    Eigen::MatrixXd t = l0.transpose() * xs.transpose();
    la.triangularView<Eigen::Lower>().solveInPlace(t);
    out.variances = t.colwise().squaredNorm().transpose().array() + m.noise_variance;
    return out;
}

PredictiveDistribution predict_gp(const GpModel& m, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const NoiseVector& noise,
                                  const Eigen::MatrixXd& xs) {
    Eigen::MatrixXd k = kernel_matrix(m.kernel, x, x);
    k.diagonal() += noise;
    const Eigen::MatrixXd l = cholesky_psd(std::move(k), "GP training covariance");
    Eigen::VectorXd alpha = l.triangularView<Eigen::Lower>().solve(y);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);

    const Eigen::MatrixXd kxs = kernel_matrix(m.kernel, x, xs);  // m x t
    PredictiveDistribution out;
    out.means.noalias() = kxs.transpose() * alpha;
    Eigen::MatrixXd v = kxs;
    l.triangularView<Eigen::Lower>().solveInPlace(v);
    const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
    const Eigen::VectorXd prior = kernel_diagonal(m.kernel, xs);
    out.variances = (prior - explained).cwiseMax(0.0).array() + m.noise_variance;
    return out;
}

PredictiveDistribution predict_dtc(const DtcModel& m, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const NoiseVector& noise,
                                   const Eigen::MatrixXd& xs) {
    const Eigen::MatrixXd kuu =
        kernel_matrix(m.kernel, m.inducing_inputs, m.inducing_inputs);
    const Eigen::MatrixXd luu = cholesky_psd(kuu, "DTC inducing covariance");

    // A = Kuu + Kux Kn^-1 Kxu, via W = Kux Kn^{-1/2}.
    const Eigen::VectorXd dinv_sqrt = noise.array().rsqrt();
    const Eigen::MatrixXd w =
        kernel_matrix(m.kernel, m.inducing_inputs, x) * dinv_sqrt.asDiagonal();
    Eigen::MatrixXd a = kuu;
    a.noalias() += w * w.transpose();
    const Eigen::MatrixXd la = cholesky_psd(std::move(a), "DTC posterior information");

    Eigen::VectorXd b = w * (dinv_sqrt.asDiagonal() * y);  // Kux Kn^-1 y
    la.triangularView<Eigen::Lower>().solveInPlace(b);
    Eigen::VectorXd sol = b;
    la.transpose().triangularView<Eigen::Upper>().solveInPlace(sol);

    const Eigen::MatrixXd ksu = kernel_matrix(m.kernel, xs, m.inducing_inputs);  // t x u
    PredictiveDistribution out;
    out.means.noalias() = ksu * sol;

    Eigen::MatrixXd p = ksu.transpose();
    luu.triangularView<Eigen::Lower>().solveInPlace(p);
    Eigen::MatrixXd q = ksu.transpose();
    la.triangularView<Eigen::Lower>().solveInPlace(q);
    const Eigen::VectorXd prior = kernel_diagonal(m.kernel, xs);
    const Eigen::VectorXd latent = prior - p.colwise().squaredNorm().transpose() +
                                   q.colwise().squaredNorm().transpose();
    out.variances = latent.cwiseMax(0.0).array() + m.noise_variance;
    return out;
}

}  // namespace

PredictiveDistribution posterior_predict(const ModelSpec& model,
                                         const Eigen::MatrixXd& train_inputs,
                                         const Eigen::VectorXd& train_outputs,
                                         const NoiseVector& noise,
                                         const Eigen::MatrixXd& test_inputs) {
    model.validate();
    const Eigen::Index d = model.input_dim();
    if (test_inputs.cols() != d) {
        throw ConfigError("test inputs have dimension " + std::to_string(test_inputs.cols()) +
                          " but the model expects " + std::to_string(d));
    }
    if (!test_inputs.allFinite()) throw ConfigError("test inputs contain non-finite values");
    if (train_inputs.rows() != train_outputs.size()) {
        throw ConfigError("training inputs and outputs disagree on row count");
    }

    // Normalize the empty training set so the single code path below sees
    // consistent shapes regardless of how the caller spelled "no data".
    Eigen::MatrixXd x = train_inputs;
    Eigen::VectorXd y = train_outputs;
    if (x.rows() == 0) {
        x = Eigen::MatrixXd(0, d);
        y = Eigen::VectorXd(0);
    } else {
        if (x.cols() != d) {
            throw ConfigError("training inputs have dimension " + std::to_string(x.cols()) +
                              " but the model expects " + std::to_string(d));
        }
        if (!x.allFinite() || !y.allFinite()) {
            throw ConfigError("training data contains non-finite values");
        }
    }
    validate_noise(noise, x.rows());
    const Eigen::VectorXd dinv = noise.array().inverse();

    PredictiveDistribution out = std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, BlrModel>) {
                return predict_blr(m, x, y, dinv, test_inputs);
            } else if constexpr (std::is_same_v<T, GpModel>) {
                return predict_gp(m, x, y, noise, test_inputs);
            } else {
                return predict_dtc(m, x, y, noise, test_inputs);
            }
        },
        model.model);

    for (Eigen::Index i = 0; i < out.variances.size(); ++i) {
        if (!(out.variances[i] > 0.0) || !std::isfinite(out.variances[i])) {
            throw NumericError("predictive variance is not strictly positive");
        }
    }
    if (!out.means.allFinite()) throw NumericError("predictive mean is not finite");
    return out;
}

}  // namespace covalue
