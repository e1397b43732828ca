#pragma once

#include <memory>
#include <variant>

#include <Eigen/Dense>

namespace covalue {

struct SquaredExponentialArd {
    double signal_variance = 1.0;
    Eigen::VectorXd lengthscales;  // one per input dimension
};

struct ExponentialArd {
    double signal_variance = 1.0;
    Eigen::VectorXd lengthscales;
};

struct KernelSpec;

// Sum of two leaf kernels (nesting deeper than one sum is rejected).
struct KernelSum {
    std::shared_ptr<const KernelSpec> left;
    std::shared_ptr<const KernelSpec> right;
};

struct KernelSpec {
    std::variant<SquaredExponentialArd, ExponentialArd, KernelSum> node;

    int dim() const;
    // k(x, x): signal variance, summed across sum components.
    double diagonal_value() const;
    void validate() const;  // throws ConfigError

    static KernelSpec squared_exponential(double signal_variance, Eigen::VectorXd lengthscales);
    static KernelSpec exponential(double signal_variance, Eigen::VectorXd lengthscales);
    static KernelSpec sum(KernelSpec left, KernelSpec right);
};

// Cross-covariance matrix k(A_i, B_j); A and B are row-major point sets
// sharing the kernel's input dimension.
Eigen::MatrixXd kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

// diag(kernel_matrix(a, a)) without the m^2 cost.
Eigen::VectorXd kernel_diagonal(const KernelSpec& kernel, const Eigen::MatrixXd& a);

}  // namespace covalue
