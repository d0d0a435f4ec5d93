#include "firesale/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace firesale {

ShockedLeverage leverage_after_shock(const Bank& bank, double epsilon) {
    if (!(bank.assets > 0)) throw Error(ErrorKind::validation, "bank " + bank.id + ": assets must be positive");
    if (!(epsilon >= 0 && epsilon < 1)) throw Error(ErrorKind::validation, "shock must lie in [0, 1)");
    ShockedLeverage out;
    out.value = (bank.equity - epsilon * bank.assets) / ((1.0 - epsilon) * bank.assets);
    out.wiped_out = epsilon >= bank.leverage();
    return out;
}

IndustryPanel build_matrices(std::span<const Bank> banks) {
    IndustryPanel p;
    std::set<IndustryId> names;
    for (const auto& b : banks) {
        if (!(b.assets > 0)) throw Error(ErrorKind::validation, "bank " + b.id + ": assets must be positive");
        for (const auto& [k, v] : b.investments) {
            if (v < 0) throw Error(ErrorKind::validation, "bank " + b.id + ": negative investment in " + k);
            if (v > 0) names.insert(k);
        }
        double sum = 0;
        for (const auto& kv : b.investments) sum += kv.second;
        if (std::fabs(sum - b.assets) > 1e-9 * std::max(1.0, b.assets))
            throw Error(ErrorKind::validation, "bank " + b.id + ": investments do not add up to assets");
    }
    if (names.empty() && !banks.empty()) throw Error(ErrorKind::validation, "no industry holds any investment");
    p.industries.assign(names.begin(), names.end());
    const auto n = static_cast<Eigen::Index>(banks.size());
    const auto k = static_cast<Eigen::Index>(p.industries.size());
    p.holdings = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = banks[static_cast<std::size_t>(i)];
        p.banks.push_back(b.id);
        for (Eigen::Index c = 0; c < k; ++c) {
            auto it = b.investments.find(p.industries[static_cast<std::size_t>(c)]);
            if (it != b.investments.end()) p.holdings(i, c) = it->second;
        }
    }
    p.values = p.holdings.colwise().sum().transpose();
    p.disposal = Eigen::MatrixXd::Zero(n, k);
    p.contagion = Eigen::MatrixXd::Zero(k, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < k; ++c) {
            p.disposal(i, c) = p.holdings(i, c) / banks[static_cast<std::size_t>(i)].assets;
            p.contagion(c, i) = p.holdings(i, c) / p.values(c);
        }
    return p;
}

PositionReport detect_positions(const IndustryPanel& panel) {
    PositionReport r;
    const auto n = panel.holdings.rows(), k = panel.holdings.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<IndustryId> owned;
        int held = 0;
        Eigen::Index only = -1;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (panel.holdings(i, c) <= 0) continue;
            ++held;
            only = c;
            int holders = 0;
            for (Eigen::Index j = 0; j < n; ++j) holders += panel.holdings(j, c) > 0;
            if (holders == 1) owned.push_back(panel.industries[static_cast<std::size_t>(c)]);
        }
        if (!owned.empty()) r.monopolies.emplace_back(panel.banks[static_cast<std::size_t>(i)], owned);
        if (held == 1)
            r.specializations.emplace_back(panel.banks[static_cast<std::size_t>(i)],
                                           panel.industries[static_cast<std::size_t>(only)]);
    }
    return r;
}

int determinant_sign(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) return 0;
    if (m.rows() == 0) return 1;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() < m.rows()) return 0;
    double d = lu.determinant();
    return d > 0 ? 1 : (d < 0 ? -1 : 0);
}

int numeric_rank(const Eigen::MatrixXd& m, double threshold) {
    if (m.size() == 0) return 0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    lu.setThreshold(threshold);
    return static_cast<int>(lu.rank());
}

namespace {

void erase_row(Eigen::MatrixXd& m, Eigen::Index r) {
    Eigen::MatrixXd out(m.rows() - 1, m.cols());
    out.topRows(r) = m.topRows(r);
    out.bottomRows(m.rows() - r - 1) = m.bottomRows(m.rows() - r - 1);
    m = std::move(out);
}

void erase_col(Eigen::MatrixXd& m, Eigen::Index c) {
    Eigen::MatrixXd out(m.rows(), m.cols() - 1);
    out.leftCols(c) = m.leftCols(c);
    out.rightCols(m.cols() - c - 1) = m.rightCols(m.cols() - c - 1);
    m = std::move(out);
}

int nonzeros_in_col(const Eigen::MatrixXd& m, Eigen::Index c, Eigen::Index* where) {
    int cnt = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        if (m(r, c) != 0) { ++cnt; *where = r; }
    return cnt;
}

int nonzeros_in_row(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index* where) {
    int cnt = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (m(r, c) != 0) { ++cnt; *where = c; }
    return cnt;
}

}  // namespace

Reduction reduce_matrix(const IndustryPanel& panel) {
    Reduction red;
    Eigen::MatrixXd m = panel.disposal;
    auto rows = panel.banks;
    auto cols = panel.industries;
    red.applicable = m.rows() == m.cols();

    auto remove = [&](Eigen::Index r, Eigen::Index c, std::vector<IndustryId> inds, bool monopoly) {
        red.cofactor_parity *= ((r + c) % 2 == 0) ? 1 : -1;
        red.pivot_product *= m(r, c);
        red.eliminated.push_back({rows[static_cast<std::size_t>(r)], std::move(inds), monopoly});
        erase_row(m, r);
        erase_col(m, c);
        rows.erase(rows.begin() + r);
        cols.erase(cols.begin() + c);
    };

    bool changed = true;
    while (changed && m.rows() > 0 && m.cols() > 0) {
        changed = false;
        // Monopolies first: a column with a single holder.
        for (Eigen::Index c = 0; c < m.cols() && !changed; ++c) {
            Eigen::Index r = -1;
            if (nonzeros_in_col(m, c, &r) != 1) continue;
            std::vector<Eigen::Index> owned;
            for (Eigen::Index cc = 0; cc < m.cols(); ++cc) {
                Eigen::Index rr = -1;
                if (nonzeros_in_col(m, cc, &rr) == 1 && rr == r) owned.push_back(cc);
            }
            std::vector<IndustryId> names;
            for (auto cc : owned) names.push_back(cols[static_cast<std::size_t>(cc)]);
            if (owned.size() > 1) {
                red.merged_monopolies = true;
                for (std::size_t q = owned.size() - 1; q >= 1; --q) {
                    m.col(owned[0]) += m.col(owned[q]);
                    erase_col(m, owned[q]);
                    cols.erase(cols.begin() + owned[q]);
                }
            }
            remove(r, owned[0], names, true);
            changed = true;
        }
        if (changed) continue;
        for (Eigen::Index r = 0; r < m.rows() && !changed; ++r) {
            Eigen::Index c = -1;
            if (nonzeros_in_row(m, r, &c) != 1) continue;
            remove(r, c, {cols[static_cast<std::size_t>(c)]}, false);
            changed = true;
        }
    }
    red.reduced = m;
    red.kept_banks = rows;
    red.kept_industries = cols;
    red.rows_independent = m.rows() == 0 || numeric_rank(m) == m.rows();
    if (red.applicable) {
        red.det_sign_full = determinant_sign(panel.disposal);
        red.det_sign_reduced = m.rows() == m.cols() ? determinant_sign(m) : 0;
        red.sign_preserved = red.det_sign_full == red.det_sign_reduced;
        red.sign_matches_with_parity = red.det_sign_full == red.cofactor_parity * red.det_sign_reduced;
    }
    return red;
}

ValidationReport validate_scenario(const Scenario& sc, bool dynamics_requested) {
    ValidationReport r;
    const auto& env = sc.market;
    if (sc.banks.empty()) r.violations.push_back("scenario has no banks");
    if (!(env.theta_bar > 0 && env.theta_bar < 1)) r.violations.push_back("theta_bar must lie in (0, 1)");
    if (!(env.beta >= 0)) r.violations.push_back("beta must be non-negative");
    if (!(env.epsilon >= 0 && env.epsilon < 1)) r.violations.push_back("epsilon must lie in [0, 1)");
    if (!(env.p_switch >= 0 && env.p_switch <= 1)) r.violations.push_back("p_switch must lie in [0, 1]");

    std::set<BankId> seen;
    for (const auto& b : sc.banks) {
        const std::string tag = "bank " + b.id + ": ";
        if (!seen.insert(b.id).second) r.violations.push_back(tag + "duplicate id");
        if (!(b.assets > 0)) { r.violations.push_back(tag + "assets must be positive"); continue; }
        if (b.liabilities() < 0) r.violations.push_back(tag + "equity exceeds assets");
        double th = b.leverage();
        if (!(th > 0 && th < 1)) r.violations.push_back(tag + "leverage must lie in (0, 1)");
        else if (th < env.theta_bar) r.violations.push_back(tag + "leverage below theta_bar");
        double sum = 0;
        bool negative = false;
        for (const auto& kv : b.investments) { sum += kv.second; negative = negative || kv.second < 0; }
        if (negative) r.violations.push_back(tag + "negative investment");
        if (std::fabs(sum - b.assets) > 1e-9 * std::max(1.0, b.assets))
            r.violations.push_back(tag + "investments do not add up to assets");
    }
    if (!r.ok()) return r;

    if (dynamics_requested) {
        double mean_theta = 0, max_root = 0;
        for (const auto& b : sc.banks) {
            mean_theta += b.leverage();
            max_root = std::max(max_root, (b.leverage() - env.theta_bar) / (1 - env.theta_bar));
        }
        mean_theta /= static_cast<double>(sc.banks.size());
        double lo = (mean_theta - env.theta_bar) / (1 - env.theta_bar);
        if (env.epsilon < lo || env.epsilon > max_root) {
            std::ostringstream os;
            os << "epsilon " << env.epsilon << " outside [" << lo << ", " << max_root
               << "]: subspaces may not purify as expected";
            r.warnings.push_back(os.str());
        }
    }
    auto panel = build_matrices(sc.banks);
    // Identical rows share one price exponent; the aggregate solver needs no inversion.
    bool identical = true;
    for (Eigen::Index i = 1; i < panel.disposal.rows(); ++i)
        identical = identical && panel.disposal.row(i).isApprox(panel.disposal.row(0), 1e-12);
    auto red = reduce_matrix(panel);
    if (!identical && !red.rows_independent) r.warnings.push_back("rows of the reduced disposal matrix are linearly dependent");
    return r;
}

void require_valid(const Scenario& sc, bool dynamics_requested) {
    auto r = validate_scenario(sc, dynamics_requested);
    if (r.ok()) return;
    std::string msg = "invalid scenario:";
    for (const auto& v : r.violations) msg += "\n  " + v;
    throw Error(ErrorKind::validation, msg);
}

std::vector<Bank> select_banks(std::span<const Bank> banks, const std::vector<BankId>& ids) {
    std::vector<Bank> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(find_bank(banks, id));
    return out;
}

std::vector<BankId> ids_of(std::span<const Bank> banks) {
    std::vector<BankId> out;
    for (const auto& b : banks) out.push_back(b.id);
    return out;
}

const Bank& find_bank(std::span<const Bank> banks, const BankId& id) {
    for (const auto& b : banks)
        if (b.id == id) return b;
    throw Error(ErrorKind::internal, "unknown bank " + id);
}

}  // namespace firesale
