#include "covalue/kernels.hpp"

#include <cmath>
#include <string>

#include "covalue/errors.hpp"

namespace covalue {

namespace {

void validate_leaf(double signal_variance, const Eigen::VectorXd& lengthscales) {
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
        throw ConfigError("kernel signal variance must be positive and finite");
    }
    if (lengthscales.size() == 0) throw ConfigError("kernel needs at least one lengthscale");
    for (Eigen::Index a = 0; a < lengthscales.size(); ++a) {
        if (!(lengthscales[a] > 0.0) || !std::isfinite(lengthscales[a])) {
            throw ConfigError("kernel lengthscales must be positive and finite");
        }
    }
}

double se_entry(const SquaredExponentialArd& k, const Eigen::MatrixXd& a, Eigen::Index i,
                const Eigen::MatrixXd& b, Eigen::Index j) {
    double q = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double z = (a(i, c) - b(j, c)) / k.lengthscales[c];
        q += z * z;
    }
    return k.signal_variance * std::exp(-0.5 * q);
}

double exp_entry(const ExponentialArd& k, const Eigen::MatrixXd& a, Eigen::Index i,
                 const Eigen::MatrixXd& b, Eigen::Index j) {
    double q = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        q += std::abs(a(i, c) - b(j, c)) / k.lengthscales[c];
    }
    return k.signal_variance * std::exp(-q);
}

template <typename Leaf, typename EntryFn>
Eigen::MatrixXd fill(const Leaf& k, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                     EntryFn&& entry) {
    Eigen::MatrixXd out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            out(i, j) = entry(k, a, i, b, j);
        }
    }
    return out;
}

}  // namespace

int KernelSpec::dim() const {
    return std::visit(
        [](const auto& k) -> int {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, KernelSum>) {
                return k.left ? k.left->dim() : 0;
            } else {
                return static_cast<int>(k.lengthscales.size());
            }
        },
        node);
}

double KernelSpec::diagonal_value() const {
    return std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, KernelSum>) {
                return k.left->diagonal_value() + k.right->diagonal_value();
            } else {
                return k.signal_variance;
            }
        },
        node);
}

void KernelSpec::validate() const {
    std::visit(
        [](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, KernelSum>) {
                if (!k.left || !k.right) throw ConfigError("sum kernel is missing a component");
                if (std::holds_alternative<KernelSum>(k.left->node) ||
                    std::holds_alternative<KernelSum>(k.right->node)) {
                    throw ConfigError("sum kernels may not nest");
                }
                k.left->validate();
                k.right->validate();
                if (k.left->dim() != k.right->dim()) {
                    throw ConfigError("sum kernel components disagree on input dimension");
                }
            } else {
                validate_leaf(k.signal_variance, k.lengthscales);
            }
        },
        node);
}

KernelSpec KernelSpec::squared_exponential(double signal_variance, Eigen::VectorXd lengthscales) {
    KernelSpec k{SquaredExponentialArd{signal_variance, std::move(lengthscales)}};
    k.validate();
    return k;
}

KernelSpec KernelSpec::exponential(double signal_variance, Eigen::VectorXd lengthscales) {
    KernelSpec k{ExponentialArd{signal_variance, std::move(lengthscales)}};
    k.validate();
    return k;
}

KernelSpec KernelSpec::sum(KernelSpec left, KernelSpec right) {
    KernelSpec k{KernelSum{std::make_shared<KernelSpec>(std::move(left)),
                           std::make_shared<KernelSpec>(std::move(right))}};
    k.validate();
    return k;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) {
        throw ConfigError("kernel operands disagree on input dimension");
    }
    if (kernel.dim() != a.cols() && a.rows() > 0 && b.rows() > 0) {
        throw ConfigError("kernel lengthscale count " + std::to_string(kernel.dim()) +
                          " does not match input dimension " + std::to_string(a.cols()));
    }
    return std::visit(
        [&](const auto& k) -> Eigen::MatrixXd {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, SquaredExponentialArd>) {
                return fill(k, a, b, se_entry);
            } else if constexpr (std::is_same_v<T, ExponentialArd>) {
                return fill(k, a, b, exp_entry);
            } else {
                return kernel_matrix(*k.left, a, b) + kernel_matrix(*k.right, a, b);
            }
        },
        kernel.node);
}

Eigen::VectorXd kernel_diagonal(const KernelSpec& kernel, const Eigen::MatrixXd& a) {
    return Eigen::VectorXd::Constant(a.rows(), kernel.diagonal_value());
}

}  // namespace covalue
