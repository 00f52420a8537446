#include "cskl/models.hpp"

namespace cskl {

Eigen::MatrixXd LowRankPsd::basis() const {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(factor);
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(factor.rows(), factor.cols());
  return q;
}

}  // namespace cskl
