#pragma once

#include <complex>

#include <Eigen/Dense>

namespace chirpsound {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

}  // namespace chirpsound
