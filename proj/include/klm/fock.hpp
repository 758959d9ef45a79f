#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "klm/model.hpp"

namespace klm {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;
using VecC = Eigen::VectorXcd;

enum class Spin { up, down };
enum class Projection { none, P0, Q0 };

struct BasisMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidTruncation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SectorEmpty : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Linear order of the fermionic modes: all up modes (conduction sites in list
// order, then f sites), then all down modes in the same site order. Placing
// the whole up block first makes the up/down tensor factorization of the
// half-filled sector a literal index split.
struct ModeOrder {
    int n_lambda = 0;
    int n_sites = 0;  // |lambda| + |omega|

    int n_modes() const { return 2 * n_sites; }
    int mode(int site, Spin s) const { return (s == Spin::down ? n_sites : 0) + site; }
};

// Occupation bitmasks over sites (bit i = site i in lambda-then-omega order),
// one mask per spin.
struct ElectronConfig {
    std::uint32_t up = 0;
    std::uint32_t down = 0;

    bool operator==(const ElectronConfig&) const = default;
    std::uint64_t key() const { return (std::uint64_t(up) << 32) | down; }
};

struct ElectronBasis {
    ModeOrder order;
    Projection projection = Projection::none;
    int n_up = 0;  // electrons per spin; -1 when S3 runs free (test helper)
    std::vector<ElectronConfig> configs;
    std::unordered_map<std::uint64_t, std::size_t> index;

    std::size_t dim() const { return configs.size(); }
    std::optional<std::size_t> find(ElectronConfig c) const {
        auto it = index.find(c.key());
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
};

// Half-filled, S3 = 0 sector with the requested f-site projection, in
// lexicographic (up, down) order.
ElectronBasis enumerate_basis(int n_lambda, int n_omega, Projection projection);
ElectronBasis enumerate_basis(const ValidatedModel& model, Projection projection);

// All occupations with the given total electron number, any S3 split.
// Used to exercise operators that move between S3 sectors.
ElectronBasis enumerate_fixed_number_basis(int n_lambda, int n_omega, int n_electrons);

// Applies c^dag / c for the given mode. Returns the new config and the
// parity sign (-1)^(occupied modes preceding the target in ModeOrder),
// or nothing when the mode is already occupied / empty.
std::optional<std::pair<ElectronConfig, int>> apply_fermion(bool create, int site, Spin spin,
                                                            const ModeOrder& order,
                                                            ElectronConfig config);

struct FermionOp {
    bool create;
    int site;
    Spin spin;
};

// Applies a product of fermion operators, rightmost first.
std::optional<std::pair<ElectronConfig, int>> apply_string(std::span<const FermionOp> ops,
                                                           const ModeOrder& order,
                                                           ElectronConfig config);

struct OperatorTerm {
    cplx coeff;
    std::vector<FermionOp> ops;
};

// Matrix of a sum of operator strings on the basis. Every term must keep
// basis states inside the basis; a string escaping the sector throws
// BasisMismatch.
SpMat operator_matrix(const ElectronBasis& basis, const std::vector<OperatorTerm>& terms);

enum class BosonRep { number, grid };

struct BosonParams {
    BosonRep rep = BosonRep::number;
    int n_max = 6;        // number basis: levels 0..n_max per mode
    int n_points = 48;    // grid: points per mode, >= 3
    double extent = 7.0;  // grid: domain [-extent, extent]
};

// Truncated phonon space for `modes` oscillators, with per-mode operator
// matrices. Multi-mode operators are Kronecker products in mode order with
// mode 0 slowest (index = sum occ[m] * d^(modes-1-m)).
struct BosonSpace {
    BosonRep rep = BosonRep::number;
    BosonParams params;
    int modes = 0;
    int d = 0;  // per-mode dimension
    Eigen::MatrixXcd b1, q1, p1, np1;  // per-mode annihilator, position, momentum, number
    Eigen::VectorXd grid_q;            // grid representation only

    std::size_t dim() const;
    // I x ... x op x ... x I with `op` (d x d) at the given mode.
    SpMat mode_op(int mode, const Eigen::MatrixXcd& op) const;
    SpMat identity() const;
    SpMat n_p() const;  // total phonon number
    // Diagonal multi-mode operator from per-mode diagonal values.
    SpMat diagonal_op(const std::vector<Eigen::VectorXcd>& per_mode_diag) const;
    // Total phonon occupation of a basis index (number representation only).
    int total_occupation(std::size_t idx) const;
};

BosonSpace build_boson_space(int modes, const BosonParams& params);

// Kronecker product with A slowest (product index = a * B.rows() + b).
SpMat tensor(const SpMat& A, const SpMat& B);

}  // namespace klm
