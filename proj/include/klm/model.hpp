#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace klm {

// A lattice site. sublattice is 1 or 2; for conduction sites the hopping
// graph must be bipartite with respect to this assignment.
struct Site {
    std::string id;
    int sublattice = 1;
};

// Kondo lattice model with phonons coupled to the conduction density.
// lambda: conduction sites (one phonon mode each), omega: localized f sites.
// t, U, g are |lambda| x |lambda|; J is |lambda| x |omega|.
struct ModelSpec {
    std::vector<Site> lambda;
    std::vector<Site> omega;
    Eigen::MatrixXd t;
    Eigen::MatrixXd J;
    Eigen::MatrixXd U;
    Eigen::MatrixXd g;
    double omega0 = 1.0;

    int n_lambda() const { return static_cast<int>(lambda.size()); }
    int n_omega() const { return static_cast<int>(omega.size()); }
    int n_sites() const { return n_lambda() + n_omega(); }
};

struct Violation {
    std::string condition;  // "C.1" .. "C.5"
    std::string detail;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConditionViolation : std::runtime_error {
    std::vector<Violation> violations;
    explicit ConditionViolation(std::vector<Violation> v);
};

struct MixedCouplingSigns : std::runtime_error {
    MixedCouplingSigns() : std::runtime_error("mixed coupling signs: total-spin formula requires a pure sign") {}
};

struct NotSymmetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedSize : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CouplingClass { antiferromagnetic, ferromagnetic, mixed };

std::string to_string(CouplingClass c);

struct ValidatedModel {
    ModelSpec spec;
    CouplingClass coupling_class = CouplingClass::antiferromagnetic;
    std::vector<int> gamma_lambda;  // -1 on sublattice 1, +1 on sublattice 2
    std::vector<int> gamma_omega;
    std::vector<int> sgn_j;  // sign of the nonzero J column entries, per f site
    double common_g_column_sum = 0.0;
};

// Checks dimensions (throws DimensionMismatch) and returns the list of
// violated conditions, empty when the spec is acceptable.
std::vector<Violation> condition_violations(const ModelSpec& spec);

// Throws ConditionViolation listing every violated condition.
ValidatedModel validate(const ModelSpec& spec);

// U_eff[x][y] = U[x][y] - (1/omega0) * sum_z g[x][z] g[y][z]
Eigen::MatrixXd effective_coulomb(const ValidatedModel& model);

// tol < 0 selects the default 1e-10 * (1 + max|M|).
bool is_positive_semidefinite(const Eigen::MatrixXd& M, double tol = -1.0);

// Sublattice-counting value of the ground-state total spin.
// Throws MixedCouplingSigns unless the coupling class is pure.
double predicted_total_spin(const ValidatedModel& model);

struct ExampleParams {
    double t = 1.0;
    double J = 1.0;
    double U = 0.0;
    double g = 0.0;
    double omega0 = 1.0;
};

// kind: example1 (chain with one f site per conduction site, size = |lambda|,
// even), example2 (decorated cells, size = number of cells), example3
// (decorated chain, size = |lambda|, multiple of 8), star (fixed size:
// 4-site star plus two f sites).
ModelSpec example_model(const std::string& kind, int size = 2, const ExampleParams& params = {});

nlohmann::json model_to_json(const ModelSpec& spec);
ModelSpec model_from_json(const nlohmann::json& j);
ModelSpec load_model(const std::string& path);

}  // namespace klm
