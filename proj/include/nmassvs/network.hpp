#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace nmassvs {

struct Treatment {
    std::string id;
    std::size_t index = 0;
};

/// One contrast y = effect(t2) - effect(t1) on an additive scale.
/// Inside a network t1 < t2 in canonical treatment order always holds.
struct Contrast {
    std::size_t t1 = 0;
    std::size_t t2 = 0;
    double y = 0.0;
    double se = 1.0;
};

struct Study {
    std::string id;
    std::vector<std::size_t> design;  // sorted treatment indices
    std::vector<Contrast> contrasts;  // size == design.size() - 1
    Eigen::MatrixXd cov;              // sampling covariance of the contrasts

    bool multi_arm() const { return design.size() > 2; }
};

/// Contrast-level evidence network with canonical ordering: reference treatment at
/// index 0, the rest lexicographic by id; studies in first-appearance order;
/// contrasts oriented and sorted by (t1, t2) within each study.
class EvidenceNetwork {
public:
    EvidenceNetwork() = default;
    EvidenceNetwork(std::vector<Treatment> treatments, std::vector<Study> studies);

    const std::vector<Treatment>& treatments() const { return treatments_; }
    const std::vector<Study>& studies() const { return studies_; }
    std::size_t treatment_count() const { return treatments_.size(); }
    std::size_t study_count() const { return studies_.size(); }
    std::size_t contrast_count() const { return contrast_count_; }
    const Treatment& reference() const { return treatments_.front(); }

    std::optional<std::size_t> index_of(const std::string& id) const;
    const std::string& name(std::size_t index) const { return treatments_.at(index).id; }

    /// Stacked effect estimates in row order (study order, then contrast order).
    Eigen::VectorXd y() const;
    /// Row offset of each study's first contrast.
    std::vector<std::size_t> row_offsets() const;

    bool operator==(const EvidenceNetwork& other) const;

private:
    std::vector<Treatment> treatments_;
    std::vector<Study> studies_;
    std::size_t contrast_count_ = 0;
};

// ---------------------------------------------------------------------------
// Raw input records
// ---------------------------------------------------------------------------

struct ContrastRecord {
    std::string study;
    std::string t1;
    std::string t2;
    double y = 0.0;
    double se = 0.0;
    std::size_t line = 0;
};

/// Off-diagonal covariance of a multi-arm study. `row` and `col` are 1-based
/// positions of the contrasts among that study's rows in the data file.
struct CovarianceRecord {
    std::string study;
    std::size_t row = 0;
    std::size_t col = 0;
    double cov = 0.0;
    std::size_t line = 0;
};

struct ArmRecord {
    std::string study;
    std::string treatment;
    double se_arm = 0.0;
    std::size_t line = 0;
};

struct NetworkInput {
    std::vector<ContrastRecord> contrasts;
    std::vector<CovarianceRecord> covariances;
    std::vector<ArmRecord> arms;
    std::optional<std::string> reference;
};

/// Parses the comma-separated inputs. Throws ValidationError listing every
/// malformed row.
NetworkInput read_network_files(const std::filesystem::path& data,
                                const std::optional<std::filesystem::path>& cov = std::nullopt,
                                const std::optional<std::filesystem::path>& arms = std::nullopt,
                                std::optional<std::string> reference = std::nullopt);

/// Validates and canonicalizes. All problems are collected into one ValidationError.
EvidenceNetwork build_network(const NetworkInput& input);

EvidenceNetwork load_network(const std::filesystem::path& data,
                             const std::optional<std::filesystem::path>& cov = std::nullopt,
                             const std::optional<std::filesystem::path>& arms = std::nullopt,
                             std::optional<std::string> reference = std::nullopt);

/// Covariance of the contrasts (anchor vs every other arm, in arm order) given the
/// arm-level variances. Off-diagonals equal the anchor variance.
Eigen::MatrixXd multiarm_covariance(std::span<const double> arm_variances, std::size_t anchor);

struct PruneResult {
    EvidenceNetwork network;
    std::vector<std::string> removed;
};

/// Keeps the connected component of the reference treatment.
PruneResult prune_disconnected(const EvidenceNetwork& network);

// Canonical serialization
nlohmann::ordered_json to_json(const EvidenceNetwork& network);
EvidenceNetwork network_from_json(const nlohmann::ordered_json& doc);

/// Writes the network back as data (+ covariance) files loadable by load_network.
void write_network_csv(const EvidenceNetwork& network, const std::filesystem::path& data,
                       const std::filesystem::path& cov);

/// Symmetric positive definiteness via Cholesky.
bool is_positive_definite(const Eigen::MatrixXd& m);

} // namespace nmassvs
