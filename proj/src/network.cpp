#include "nmassvs/network.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nmassvs/errors.hpp"

namespace nmassvs {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::size_t> parse_index(const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
        return std::nullopt;
    return static_cast<std::size_t>(std::stoull(s));
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Reads a comma-separated file with an exact header; calls `row` for each data line.
template <typename RowFn>
void read_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                std::vector<std::string>& errors, RowFn&& row) {
    std::ifstream in(path);
    if (!in) {
        errors.push_back(path.string() + ": cannot open file");
        return;
    }
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        if (!have_header) {
            have_header = true;
            if (fields != header) {
                std::string expected;
                for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
                errors.push_back(path.string() + ":" + std::to_string(line_no) +
                                 ": header must be exactly '" + expected + "'");
                return;
            }
            continue;
        }
        if (fields.size() != header.size()) {
            errors.push_back(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
            continue;
        }
        row(fields, line_no, path.string() + ":" + std::to_string(line_no) + ": ");
    }
    if (!have_header) errors.push_back(path.string() + ": empty file");
}

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[std::max(a, b)] = std::min(a, b);
        return true;
    }
    std::vector<std::size_t> parent;
};

} // namespace

// ---------------------------------------------------------------------------

EvidenceNetwork::EvidenceNetwork(std::vector<Treatment> treatments, std::vector<Study> studies)
    : treatments_(std::move(treatments)), studies_(std::move(studies)) {
    for (std::size_t i = 0; i < treatments_.size(); ++i) {
        if (treatments_[i].index != i) throw std::invalid_argument("treatment indices must be 0..T-1");
    }
    for (const auto& s : studies_) {
        if (s.contrasts.size() + 1 != s.design.size())
            throw std::invalid_argument("study " + s.id + " must carry T_s - 1 contrasts");
        if (s.cov.rows() != static_cast<Eigen::Index>(s.contrasts.size()) || s.cov.cols() != s.cov.rows())
            throw std::invalid_argument("study " + s.id + " covariance has wrong shape");
        for (const auto& c : s.contrasts) {
            if (c.t1 >= treatments_.size() || c.t2 >= treatments_.size())
                throw std::invalid_argument("study " + s.id + " references an unknown treatment");
        }
        contrast_count_ += s.contrasts.size();
    }
}

std::optional<std::size_t> EvidenceNetwork::index_of(const std::string& id) const {
    for (const auto& t : treatments_)
        if (t.id == id) return t.index;
    return std::nullopt;
}

Eigen::VectorXd EvidenceNetwork::y() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(contrast_count_));
    Eigen::Index row = 0;
    for (const auto& s : studies_)
        for (const auto& c : s.contrasts) out(row++) = c.y;
    return out;
}

std::vector<std::size_t> EvidenceNetwork::row_offsets() const {
    std::vector<std::size_t> offsets;
    std::size_t row = 0;
    for (const auto& s : studies_) {
        offsets.push_back(row);
        row += s.contrasts.size();
    }
    return offsets;
}

bool EvidenceNetwork::operator==(const EvidenceNetwork& other) const {
    if (treatments_.size() != other.treatments_.size() || studies_.size() != other.studies_.size())
        return false;
    for (std::size_t i = 0; i < treatments_.size(); ++i)
        if (treatments_[i].id != other.treatments_[i].id) return false;
    for (std::size_t s = 0; s < studies_.size(); ++s) {
        const auto& a = studies_[s];
        const auto& b = other.studies_[s];
        if (a.id != b.id || a.design != b.design || a.contrasts.size() != b.contrasts.size()) return false;
        for (std::size_t k = 0; k < a.contrasts.size(); ++k) {
            const auto& ca = a.contrasts[k];
            const auto& cb = b.contrasts[k];
            if (ca.t1 != cb.t1 || ca.t2 != cb.t2 || ca.y != cb.y || ca.se != cb.se) return false;
        }
        if (a.cov != b.cov) return false;
    }
    return true;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    if (!m.isApprox(m.transpose(), 1e-12)) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    return llt.info() == Eigen::Success;
}

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

NetworkInput read_network_files(const std::filesystem::path& data,
                                const std::optional<std::filesystem::path>& cov,
                                const std::optional<std::filesystem::path>& arms,
                                std::optional<std::string> reference) {
    NetworkInput input;
    input.reference = std::move(reference);
    std::vector<std::string> errors;

    read_table(data, {"study", "t1", "t2", "y", "se"}, errors,
               [&](const std::vector<std::string>& f, std::size_t line, const std::string& where) {
                   const auto y = parse_double(f[3]);
                   const auto se = parse_double(f[4]);
                   if (f[0].empty() || f[1].empty() || f[2].empty())
                       errors.push_back(where + "study, t1 and t2 must be non-empty");
                   if (!y) errors.push_back(where + "y is not a finite number: '" + f[3] + "'");
                   if (!se) errors.push_back(where + "se is not a finite number: '" + f[4] + "'");
                   if (!y || !se) return;
                   input.contrasts.push_back({f[0], f[1], f[2], *y, *se, line});
               });

    if (cov) {
        read_table(*cov, {"study", "row", "col", "cov"}, errors,
                   [&](const std::vector<std::string>& f, std::size_t line, const std::string& where) {
                       const auto r = parse_index(f[1]);
                       const auto c = parse_index(f[2]);
                       const auto v = parse_double(f[3]);
                       if (!r || !c || *r == 0 || *c == 0)
                           errors.push_back(where + "row and col must be positive integers");
                       if (!v) errors.push_back(where + "cov is not a finite number: '" + f[3] + "'");
                       if (!r || !c || !v || *r == 0 || *c == 0) return;
                       input.covariances.push_back({f[0], *r, *c, *v, line});
                   });
    }
    if (arms) {
        read_table(*arms, {"study", "treatment", "se_arm"}, errors,
                   [&](const std::vector<std::string>& f, std::size_t line, const std::string& where) {
                       const auto v = parse_double(f[2]);
                       if (!v) {
                           errors.push_back(where + "se_arm is not a finite number: '" + f[2] + "'");
                           return;
                       }
                       input.arms.push_back({f[0], f[1], *v, line});
                   });
    }
    if (!errors.empty()) throw ValidationError(std::move(errors));
    return input;
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

EvidenceNetwork build_network(const NetworkInput& input) {
    std::vector<std::string> errors;
    if (input.contrasts.empty()) throw ValidationError("no contrast rows");

    // Studies in first-appearance order.
    std::vector<std::string> study_ids;
    std::map<std::string, std::vector<const ContrastRecord*>> by_study;
    std::set<std::string> ids;
    for (const auto& r : input.contrasts) {
        if (!by_study.count(r.study)) study_ids.push_back(r.study);
        by_study[r.study].push_back(&r);
        ids.insert(r.t1);
        ids.insert(r.t2);
    }

    std::string reference = input.reference.value_or(*ids.begin());
    if (!ids.count(reference))
        throw ValidationError("reference treatment '" + reference + "' does not appear in the data");

    std::vector<Treatment> treatments{{reference, 0}};
    for (const auto& id : ids)
        if (id != reference) treatments.push_back({id, treatments.size()});
    std::map<std::string, std::size_t> index;
    for (const auto& t : treatments) index[t.id] = t.index;

    std::map<std::string, std::vector<const CovarianceRecord*>> cov_by_study;
    for (const auto& r : input.covariances) {
        if (!by_study.count(r.study)) {
            errors.push_back("covariance line " + std::to_string(r.line) + ": unknown study '" + r.study + "'");
            continue;
        }
        cov_by_study[r.study].push_back(&r);
    }
    std::map<std::string, std::map<std::string, double>> arm_var;
    for (const auto& r : input.arms) {
        if (!by_study.count(r.study)) {
            errors.push_back("arm line " + std::to_string(r.line) + ": unknown study '" + r.study + "'");
            continue;
        }
        if (!(r.se_arm > 0.0)) {
            errors.push_back("arm line " + std::to_string(r.line) + ": se_arm must be positive");
            continue;
        }
        if (!arm_var[r.study].emplace(r.treatment, r.se_arm * r.se_arm).second)
            errors.push_back("arm line " + std::to_string(r.line) + ": duplicate arm '" + r.treatment +
                             "' in study '" + r.study + "'");
    }

    std::vector<Study> studies;
    for (const auto& sid : study_ids) {
        const auto& rows = by_study[sid];
        const std::string where = "study '" + sid + "': ";
        bool ok = true;

        std::set<std::size_t> design_set;
        std::set<std::pair<std::size_t, std::size_t>> pairs;
        for (const auto* r : rows) {
            const std::string at = where + "line " + std::to_string(r->line) + ": ";
            if (!(r->se > 0.0)) {
                errors.push_back(at + "se must be positive");
                ok = false;
            }
            if (r->t1 == r->t2) {
                errors.push_back(at + "t1 and t2 must differ");
                ok = false;
                continue;
            }
            const auto a = index[r->t1];
            const auto b = index[r->t2];
            design_set.insert(a);
            design_set.insert(b);
            if (!pairs.emplace(std::min(a, b), std::max(a, b)).second) {
                errors.push_back(at + "duplicate contrast " + r->t1 + "-" + r->t2);
                ok = false;
            }
        }
        if (!ok) continue;

        std::vector<std::size_t> design(design_set.begin(), design_set.end());
        if (rows.size() + 1 != design.size()) {
            errors.push_back(where + "has " + std::to_string(rows.size()) + " contrasts over " +
                             std::to_string(design.size()) + " treatments; expected " +
                             std::to_string(design.size() - 1));
            continue;
        }
        {
            UnionFind uf(treatments.size());
            std::size_t merges = 0;
            for (const auto* r : rows) merges += uf.unite(index[r->t1], index[r->t2]);
            if (merges + 1 != design.size()) {
                errors.push_back(where + "contrasts do not connect all arms of the study");
                continue;
            }
        }

        // Covariance in file order and orientation.
        const auto m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index k = 0; k < m; ++k) cov(k, k) = rows[k]->se * rows[k]->se;

        if (m > 1) {
            const auto cit = cov_by_study.find(sid);
            const auto ait = arm_var.find(sid);
            if (cit != cov_by_study.end()) {
                Eigen::MatrixXi seen = Eigen::MatrixXi::Zero(m, m);
                for (const auto* c : cit->second) {
                    const std::string at = where + "covariance line " + std::to_string(c->line) + ": ";
                    if (c->row > static_cast<std::size_t>(m) || c->col > static_cast<std::size_t>(m)) {
                        errors.push_back(at + "row/col out of range 1.." + std::to_string(m));
                        ok = false;
                        continue;
                    }
                    const auto i = static_cast<Eigen::Index>(c->row - 1);
                    const auto j = static_cast<Eigen::Index>(c->col - 1);
                    if (i == j) {
                        if (std::abs(c->cov - cov(i, i)) > 1e-9 * cov(i, i)) {
                            errors.push_back(at + "diagonal entry disagrees with se^2");
                            ok = false;
                        }
                        continue;
                    }
                    if (seen(i, j) && std::abs(cov(i, j) - c->cov) > 1e-12) {
                        errors.push_back(at + "conflicting entries for (" + std::to_string(c->row) + "," +
                                         std::to_string(c->col) + ")");
                        ok = false;
                    }
                    cov(i, j) = cov(j, i) = c->cov;
                    seen(i, j) = seen(j, i) = 1;
                }
                for (Eigen::Index i = 0; ok && i < m; ++i)
                    for (Eigen::Index j = i + 1; j < m; ++j)
                        if (!seen(i, j)) {
                            errors.push_back(where + "missing covariance for contrasts (" +
                                             std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
                            ok = false;
                        }
            } else if (ait != arm_var.end()) {
                // Shared-arm algebra: contrast k = arm t2 - arm t1.
                for (auto t : design) {
                    if (!ait->second.count(treatments[t].id)) {
                        errors.push_back(where + "missing se_arm for treatment '" + treatments[t].id + "'");
                        ok = false;
                    }
                }
                if (ok) {
                    for (Eigen::Index i = 0; i < m; ++i)
                        for (Eigen::Index j = i + 1; j < m; ++j) {
                            double v = 0.0;
                            const auto& ri = *rows[i];
                            const auto& rj = *rows[j];
                            for (const auto& [arm, var] : ait->second) {
                                const double ai = (arm == ri.t2) - (arm == ri.t1);
                                const double aj = (arm == rj.t2) - (arm == rj.t1);
                                v += ai * aj * var;
                            }
                            cov(i, j) = cov(j, i) = v;
                        }
                }
            } else {
                errors.push_back(where + "multi-arm study needs covariance entries or arm-level standard errors");
                ok = false;
            }
        } else if (cov_by_study.count(sid)) {
            for (const auto* c : cov_by_study[sid]) {
                if (c->row != 1 || c->col != 1) {
                    errors.push_back(where + "covariance line " + std::to_string(c->line) +
                                     ": two-arm study has a single contrast");
                    ok = false;
                }
            }
        }
        if (!ok) continue;

        // Orient t1 < t2 and sort.
        std::vector<Contrast> oriented;
        std::vector<double> sign;
        for (const auto* r : rows) {
            auto a = index[r->t1];
            auto b = index[r->t2];
            double y = r->y;
            double s = 1.0;
            if (a > b) {
                std::swap(a, b);
                y = -y;
                s = -1.0;
            }
            oriented.push_back({a, b, y, r->se});
            sign.push_back(s);
        }
        std::vector<std::size_t> order(rows.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return std::tie(oriented[i].t1, oriented[i].t2) < std::tie(oriented[j].t1, oriented[j].t2);
        });

        Study study;
        study.id = sid;
        study.design = design;
        study.cov.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            study.contrasts.push_back(oriented[order[i]]);
            for (Eigen::Index j = 0; j < m; ++j)
                study.cov(i, j) = sign[order[i]] * sign[order[j]] * cov(order[i], order[j]);
        }
        if (!is_positive_definite(study.cov)) {
            errors.push_back(where + "covariance block is not positive definite");
            continue;
        }
        studies.push_back(std::move(study));
    }

    if (!errors.empty()) throw ValidationError(std::move(errors));
    return EvidenceNetwork(std::move(treatments), std::move(studies));
}

EvidenceNetwork load_network(const std::filesystem::path& data,
                             const std::optional<std::filesystem::path>& cov,
                             const std::optional<std::filesystem::path>& arms,
                             std::optional<std::string> reference) {
    return build_network(read_network_files(data, cov, arms, std::move(reference)));
}

Eigen::MatrixXd multiarm_covariance(std::span<const double> arm_variances, std::size_t anchor) {
    if (arm_variances.size() < 3) throw std::invalid_argument("multiarm_covariance needs at least 3 arms");
    if (anchor >= arm_variances.size()) throw std::invalid_argument("anchor arm is not part of the study");
    for (double v : arm_variances)
        if (!(v > 0.0)) throw std::invalid_argument("arm variances must be positive");

    const auto m = static_cast<Eigen::Index>(arm_variances.size() - 1);
    std::vector<double> others;
    for (std::size_t i = 0; i < arm_variances.size(); ++i)
        if (i != anchor) others.push_back(arm_variances[i]);
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(m, m, arm_variances[anchor]);
    for (Eigen::Index k = 0; k < m; ++k) out(k, k) += others[k];
    return out;
}

PruneResult prune_disconnected(const EvidenceNetwork& network) {
    const auto T = network.treatment_count();
    bool reference_seen = false;
    UnionFind uf(T);
    for (const auto& s : network.studies()) {
        for (auto t : s.design) reference_seen |= (t == 0);
        for (std::size_t k = 1; k < s.design.size(); ++k) uf.unite(s.design[0], s.design[k]);
    }
    if (!reference_seen)
        throw ValidationError("reference treatment '" + network.reference().id + "' has no comparisons");

    const auto root = uf.find(0);
    std::vector<std::size_t> remap(T, static_cast<std::size_t>(-1));
    std::vector<Treatment> kept;
    PruneResult result;
    for (const auto& t : network.treatments()) {
        if (uf.find(t.index) == root) {
            remap[t.index] = kept.size();
            kept.push_back({t.id, kept.size()});
        } else {
            result.removed.push_back(t.id);
        }
    }
    if (result.removed.empty()) {
        result.network = network;
        return result;
    }

    std::vector<Study> studies;
    for (const auto& s : network.studies()) {
        if (uf.find(s.design[0]) != root) continue;
        Study copy = s;
        for (auto& t : copy.design) t = remap[t];
        for (auto& c : copy.contrasts) {
            c.t1 = remap[c.t1];
            c.t2 = remap[c.t2];
        }
        studies.push_back(std::move(copy));
    }
    result.network = EvidenceNetwork(std::move(kept), std::move(studies));
    return result;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json to_json(const EvidenceNetwork& network) {
    nlohmann::ordered_json doc;
    doc["reference"] = network.reference().id;
    doc["treatments"] = nlohmann::ordered_json::array();
    for (const auto& t : network.treatments()) doc["treatments"].push_back(t.id);
    doc["studies"] = nlohmann::ordered_json::array();
    for (const auto& s : network.studies()) {
        nlohmann::ordered_json js;
        js["id"] = s.id;
        js["design"] = nlohmann::ordered_json::array();
        for (auto t : s.design) js["design"].push_back(network.name(t));
        js["contrasts"] = nlohmann::ordered_json::array();
        for (const auto& c : s.contrasts) {
            nlohmann::ordered_json jc;
            jc["t1"] = network.name(c.t1);
            jc["t2"] = network.name(c.t2);
            jc["y"] = c.y;
            jc["se"] = c.se;
            js["contrasts"].push_back(jc);
        }
        js["cov"] = nlohmann::ordered_json::array();
        for (Eigen::Index i = 0; i < s.cov.rows(); ++i) {
            auto row = nlohmann::ordered_json::array();
            for (Eigen::Index j = 0; j < s.cov.cols(); ++j) row.push_back(s.cov(i, j));
            js["cov"].push_back(row);
        }
        doc["studies"].push_back(js);
    }
    return doc;
}

EvidenceNetwork network_from_json(const nlohmann::ordered_json& doc) {
    NetworkInput input;
    input.reference = doc.at("reference").get<std::string>();
    std::size_t line = 0;
    for (const auto& js : doc.at("studies")) {
        const auto sid = js.at("id").get<std::string>();
        for (const auto& jc : js.at("contrasts"))
            input.contrasts.push_back({sid, jc.at("t1").get<std::string>(), jc.at("t2").get<std::string>(),
                                       jc.at("y").get<double>(), jc.at("se").get<double>(), ++line});
        const auto& cov = js.at("cov");
        for (std::size_t i = 0; i < cov.size(); ++i)
            for (std::size_t j = i + 1; j < cov.size(); ++j)
                input.covariances.push_back({sid, i + 1, j + 1, cov.at(i).at(j).get<double>(), line});
    }
    return build_network(input);
}

void write_network_csv(const EvidenceNetwork& network, const std::filesystem::path& data,
                       const std::filesystem::path& cov) {
    std::ofstream d(data);
    std::ofstream c(cov);
    if (!d || !c) throw std::runtime_error("cannot write network files");
    d << "study,t1,t2,y,se\n";
    c << "study,row,col,cov\n";
    for (const auto& s : network.studies()) {
        for (const auto& k : s.contrasts)
            d << s.id << ',' << network.name(k.t1) << ',' << network.name(k.t2) << ',' << fmt_double(k.y)
              << ',' << fmt_double(k.se) << '\n';
        for (Eigen::Index i = 0; i < s.cov.rows(); ++i)
            for (Eigen::Index j = i + 1; j < s.cov.cols(); ++j)
                c << s.id << ',' << i + 1 << ',' << j + 1 << ',' << fmt_double(s.cov(i, j)) << '\n';
    }
}

} // namespace nmassvs
