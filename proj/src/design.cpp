#include "nmassvs/design.hpp"

#include <Eigen/QR>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace nmassvs {

Eigen::RowVectorXd x_row(std::size_t t1, std::size_t t2, std::size_t treatment_count) {
    if (t1 >= treatment_count || t2 >= treatment_count)
        throw std::invalid_argument("contrast references a treatment absent from the network");
    if (t1 == t2) throw std::invalid_argument("contrast needs two distinct treatments");
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(treatment_count - 1));
    // mu_{t1,t2} = mu_{ref,t2} - mu_{ref,t1}; the reference has no column.
    if (t2 != 0) row(static_cast<Eigen::Index>(t2 - 1)) += 1.0;
    if (t1 != 0) row(static_cast<Eigen::Index>(t1 - 1)) -= 1.0;
    return row;
}

Eigen::MatrixXd build_X(const EvidenceNetwork& network) {
    const auto T = network.treatment_count();
    if (T < 2) throw std::invalid_argument("network needs at least two treatments");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(network.contrast_count()), static_cast<Eigen::Index>(T - 1));
    Eigen::Index row = 0;
    for (const auto& s : network.studies())
        for (const auto& c : s.contrasts) X.row(row++) = x_row(c.t1, c.t2, T);
    return X;
}

std::vector<std::string> basic_contrast_labels(const EvidenceNetwork& network) {
    std::vector<std::string> labels;
    for (std::size_t t = 1; t < network.treatment_count(); ++t)
        labels.push_back(network.reference().id + ":" + network.name(t));
    return labels;
}

Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& X, const Eigen::VectorXd& mu,
                                 const Eigen::MatrixXd& Z, const Eigen::VectorXd& b) {
    if (X.cols() != mu.size() || Z.cols() != b.size() || (Z.cols() > 0 && Z.rows() != X.rows()))
        throw std::invalid_argument("linear_predictor: dimension mismatch");
    Eigen::VectorXd eta = X * mu;
    if (Z.cols() > 0) eta += Z * b;
    return eta;
}

Eigen::Index matrix_rank(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    qr.setThreshold(1e-9);
    return qr.rank();
}

std::string matrix_to_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != m.cols())
        throw std::invalid_argument("matrix_to_csv: label count differs from column count");
    std::ostringstream out;
    for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j) == 0.0 ? 0.0 : m(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace nmassvs
