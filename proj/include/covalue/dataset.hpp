#pragma once

#include <span>

#include <Eigen/Dense>

#include "covalue/game.hpp"

namespace covalue {

// A party's labelled sample: inputs are row-wise points, outputs the
// matching responses.  Empty datasets (m = 0) are legal and useful.
struct Dataset {
    Eigen::MatrixXd inputs;   // m x d
    Eigen::VectorXd outputs;  // m

    Eigen::Index rows() const { return inputs.rows(); }
    Eigen::Index dim() const { return inputs.cols(); }

    void validate() const;  // throws ConfigError on shape/finiteness problems

    static Dataset empty(Eigen::Index d) {
        return {Eigen::MatrixXd(0, d), Eigen::VectorXd(0)};
    }
};

// Row-concatenation of the members' datasets in ascending party index.
Dataset concat_coalition(std::span<const Dataset> parties, CoalitionMask members);

}  // namespace covalue
