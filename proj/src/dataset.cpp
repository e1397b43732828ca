#include "covalue/dataset.hpp"

#include <string>

#include "covalue/errors.hpp"

namespace covalue {

void Dataset::validate() const {
    if (inputs.rows() != outputs.size()) {
        throw ConfigError("dataset has " + std::to_string(inputs.rows()) + " input rows but " +
                          std::to_string(outputs.size()) + " outputs");
    }
    if (inputs.rows() > 0 && (!inputs.allFinite() || !outputs.allFinite())) {
        throw ConfigError("dataset contains non-finite values");
    }
}

Dataset concat_coalition(std::span<const Dataset> parties, CoalitionMask members) {
    Eigen::Index total = 0;
    Eigen::Index d = parties.empty() ? 0 : parties.front().dim();
    for (std::size_t i = 0; i < parties.size(); ++i) {
        if (parties[i].dim() != d) {
            throw ConfigError("party datasets disagree on input dimension");
        }
        if ((members >> i) & 1u) total += parties[i].rows();
    }
    Dataset out{Eigen::MatrixXd(total, d), Eigen::VectorXd(total)};
    Eigen::Index at = 0;
    for (std::size_t i = 0; i < parties.size(); ++i) {
        if (!((members >> i) & 1u)) continue;
        const Eigen::Index m = parties[i].rows();
        if (m == 0) continue;
        out.inputs.middleRows(at, m) = parties[i].inputs;
        out.outputs.segment(at, m) = parties[i].outputs;
        at += m;
    }
    return out;
}

}  // namespace covalue
