// Banks, industries and the matrices derived from their holdings.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace firesale {

using BankId = std::string;
using IndustryId = std::string;

enum class ErrorKind { validation, solver, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct Bank {
    BankId id;
    double assets = 0;
    double equity = 0;
    std::map<IndustryId, double> investments;

    double leverage() const { return equity / assets; }
    double liabilities() const { return assets - equity; }
};

enum class Modularity { submodular, supermodular };

// +1 when losses from common holdings offset a bank's own sales, -1 when they add.
inline double modularity_sign(Modularity m) { return m == Modularity::submodular ? 1.0 : -1.0; }

struct MarketEnv {
    double beta = 0;         // price sensitivity
    double theta_bar = 0.04; // regulatory leverage floor
    double epsilon = 0;      // common asset shock
    double p_switch = 1;     // probability of staying put in a bad state
    Modularity modularity = Modularity::submodular;
    std::uint64_t rng_seed = 0;
};

struct Scenario {
    std::vector<Bank> banks;
    MarketEnv market;
};

// Row i: bank, column k: industry.
struct IndustryPanel {
    std::vector<BankId> banks;
    std::vector<IndustryId> industries;
    Eigen::VectorXd values;     // market value of each industry
    Eigen::MatrixXd holdings;   // raw investment amounts, banks x industries
    Eigen::MatrixXd disposal;   // share of a bank's book in each industry
    Eigen::MatrixXd contagion;  // industries x banks, share of an industry held by each bank
};

struct ShockedLeverage {
    double value = 0;
    bool wiped_out = false;
};

ShockedLeverage leverage_after_shock(const Bank& bank, double epsilon);

IndustryPanel build_matrices(std::span<const Bank> banks);

// Bank that is the only holder of an industry (possibly several), and bank
// whose whole book sits in one industry.
struct PositionReport {
    std::vector<std::pair<BankId, std::vector<IndustryId>>> monopolies;
    std::vector<std::pair<BankId, IndustryId>> specializations;
};

PositionReport detect_positions(const IndustryPanel& panel);

struct Elimination {
    BankId bank;
    std::vector<IndustryId> industries;  // more than one when monopolies were merged
    bool monopoly = false;
};

struct Reduction {
    Eigen::MatrixXd reduced;
    std::vector<BankId> kept_banks;
    std::vector<IndustryId> kept_industries;
    std::vector<Elimination> eliminated;
    bool merged_monopolies = false;
    // Only meaningful for square input.
    bool applicable = false;
    int det_sign_full = 0;
    int det_sign_reduced = 0;  // determinant of an empty matrix counts as +1
    int cofactor_parity = 1;   // product of (-1)^(row+col) over removals
    double pivot_product = 1;  // product of the removed entries
    bool sign_preserved = false;           // raw sign(det) equality
    bool sign_matches_with_parity = false; // sign(det) == parity * sign(det reduced)
    bool rows_independent = false;
};

Reduction reduce_matrix(const IndustryPanel& panel);

// Sign of a determinant with a relative tolerance; 0 when numerically singular.
int determinant_sign(const Eigen::MatrixXd& m);
int numeric_rank(const Eigen::MatrixXd& m, double threshold = 1e-9);

struct ValidationReport {
    std::vector<std::string> violations;
    std::vector<std::string> warnings;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_scenario(const Scenario& scenario, bool dynamics_requested = false);
void require_valid(const Scenario& scenario, bool dynamics_requested = false);

std::vector<Bank> select_banks(std::span<const Bank> banks, const std::vector<BankId>& ids);
std::vector<BankId> ids_of(std::span<const Bank> banks);
const Bank& find_bank(std::span<const Bank> banks, const BankId& id);

}  // namespace firesale
