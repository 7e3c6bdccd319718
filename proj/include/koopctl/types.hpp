#pragma once

#include <Eigen/Dense>

namespace koopctl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

}  // namespace koopctl
