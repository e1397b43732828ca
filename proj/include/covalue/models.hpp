#pragma once

#include <span>
#include <variant>

#include <Eigen/Dense>

#include "covalue/dataset.hpp"
#include "covalue/game.hpp"
#include "covalue/kernels.hpp"

namespace covalue {

// Bayesian linear regression with Gaussian weight prior N(mu0, Sigma0).
struct BlrModel {
    Eigen::VectorXd prior_mean;
    Eigen::MatrixXd prior_cov;
    double noise_variance = 1.0;
};

struct GpModel {
    KernelSpec kernel;
    double noise_variance = 1.0;
};

// Sparse GP under the deterministic training conditional approximation.
struct DtcModel {
    KernelSpec kernel;
    double noise_variance = 1.0;
    Eigen::MatrixXd inducing_inputs;  // u x d, non-empty
};

struct ModelSpec {
    std::variant<BlrModel, GpModel, DtcModel> model;

    double noise_variance() const;
    Eigen::Index input_dim() const;
    const char* kind() const;  // "blr" | "gp" | "dtc"
    void validate() const;
};

// Per-training-point observation noise variances (the diagonal of
// K_noise); every entry must be positive and finite.
using NoiseVector = Eigen::VectorXd;

NoiseVector homoscedastic_noise(const ModelSpec& model, Eigen::Index rows);

// Information gain of observing outputs at `inputs` under the model's
// prior, i.e. the entropy drop of the parameter/latent posterior:
//   BLR  0.5 log det(I + Sigma0 X' Kn^-1 X)
//   GP   0.5 log det(I + Kxx Kn^-1)
//   DTC  0.5 log det(I + Kxu Kuu^-1 Kux Kn^-1)
// all evaluated through symmetrized Cholesky forms.  Independent of the
// training outputs; non-negative (tiny negative round-off is clamped).
double information_gain(const ModelSpec& model, const Eigen::MatrixXd& inputs,
                        const NoiseVector& noise);
double information_gain(const ModelSpec& model, const Eigen::MatrixXd& inputs);

// Characteristic function v(C) = information gain of the concatenated
// inputs of C's members under homoscedastic model noise.  The 2^n
// coalition evaluations run in parallel; the serial variant exists as the
// reference for equivalence tests and benchmarks.
CharacteristicFunction coalition_values(const ModelSpec& model,
                                        std::span<const Dataset> parties);
CharacteristicFunction coalition_values_serial(const ModelSpec& model,
                                               std::span<const Dataset> parties);

struct PredictiveDistribution {
    Eigen::VectorXd means;
    Eigen::VectorXd variances;  // includes observation noise; strictly positive
};

// Posterior predictive at `test_inputs` after observing (train_inputs,
// train_outputs) with per-point noise.  An empty training set yields the
// prior predictive through the same code path.
PredictiveDistribution posterior_predict(const ModelSpec& model,
                                         const Eigen::MatrixXd& train_inputs,
                                         const Eigen::VectorXd& train_outputs,
                                         const NoiseVector& noise,
                                         const Eigen::MatrixXd& test_inputs);

}  // namespace covalue
