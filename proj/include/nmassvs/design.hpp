#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "nmassvs/network.hpp"

namespace nmassvs {

/// Row of the consistency design matrix for the comparison t2 - t1 over the
/// basic contrasts (reference vs treatment 1..T-1). Either direction is accepted.
Eigen::RowVectorXd x_row(std::size_t t1, std::size_t t2, std::size_t treatment_count);

/// N x (T-1) consistency design matrix, one row per stored contrast.
Eigen::MatrixXd build_X(const EvidenceNetwork& network);

/// Column labels of X, e.g. "A:B" for the basic contrast of B against reference A.
std::vector<std::string> basic_contrast_labels(const EvidenceNetwork& network);

/// X mu + Z b.
Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& Z, const Eigen::VectorXd& b);

/// Numerical rank with a tolerance suited to small integer-valued design matrices.
Eigen::Index matrix_rank(const Eigen::MatrixXd& m);

/// Comma-separated dump with a header row of column labels.
std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& labels);

} // namespace nmassvs
