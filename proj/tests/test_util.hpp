#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

// Minimum-cost row assignment between two small point sets by brute-force
// permutation search (fine for k <= 8). Returns per-row distances of the
// best matching of rows of `a` onto rows of `b`.
inline std::vector<double> match_rows(const Eigen::MatrixXd& a,
                                      const Eigen::MatrixXd& b) {
  const int k = static_cast<int>(a.rows());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < k; ++i) cost += (a.row(i) - b.row(perm[i])).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::vector<double> dists(k);
  for (int i = 0; i < k; ++i) dists[i] = (a.row(i) - b.row(best_perm[i])).norm();
  return dists;
}

inline std::vector<int> match_rows_perm(const Eigen::MatrixXd& a,
                                        const Eigen::MatrixXd& b) {
  const int k = static_cast<int>(a.rows());
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int i = 0; i < k; ++i) cost += (a.row(i) - b.row(perm[i])).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best_perm;
}
