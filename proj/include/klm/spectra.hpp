#pragma once

#include <functional>

#include "klm/operators.hpp"

namespace klm {

struct NoConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Matrix-free Hermitian operator.
struct HermOp {
    std::size_t dim = 0;
    std::function<void(const VecC&, VecC&)> apply;

    static HermOp from_sparse(const SpMat& M, double constant = 0.0);
};

struct SpectraOptions {
    int k = 2;                        // eigenpairs wanted
    double tol = 1e-11;               // residual tolerance, scaled by 1 + |lambda|
    std::uint64_t seed = 12345;
    std::size_t dense_threshold = 2000;
    int block = 0;                    // 0: k + 4
    int subspace_cap = 120;
    int max_restarts = 400;
};

struct SpectralResult {
    Eigen::VectorXd values;    // ascending
    Eigen::MatrixXcd vectors;  // columns match values
    bool dense = false;
    int iterations = 0;
};

// Lowest eigenpairs: dense solve at or below dense_threshold, otherwise
// block Krylov with full reorthogonalization and thick restarts.
SpectralResult lowest_eigenpairs(const SpMat& M, const SpectraOptions& opts = {});
SpectralResult lowest_eigenpairs(const HermOp& A, const SpectraOptions& opts = {});

// All eigenvalues, dense.
Eigen::VectorXd dense_spectrum(const SpMat& M);

enum class Degeneracy { unique, degenerate, undecided };

struct DegeneracyResult {
    Degeneracy verdict = Degeneracy::undecided;
    double e0 = 0.0;
    double gap = 0.0;
    double gap_threshold = 0.0;
    double resolution = 0.0;
};

// Verdict from the two lowest eigenvalues: unique when the gap clears
// gap_threshold * (1 + |e0|), degenerate when it sits below
// resolution * (1 + |e0|), undecided in between.
DegeneracyResult ground_state_degeneracy(const Eigen::VectorXd& values,
                                         double gap_threshold = 1e-7, double resolution = 1e-10);

// exp(-beta A) v by a Krylov projection with full reorthogonalization.
VecC expv(const HermOp& A, double beta, const VecC& v, int krylov_dim = 60, double tol = 1e-12);
VecC expv(const SpMat& M, double beta, const VecC& v, int krylov_dim = 60, double tol = 1e-12);

struct SweepRow {
    int n_max;
    double e0;
    double gap;
    double s2;
    double s;  // spin quantum number solved from s2 = s(s+1)
};

// Ground-state data of the physical Hamiltonian across phonon truncation
// levels (number representation, projected sector).
std::vector<SweepRow> truncation_sweep(const ValidatedModel& model,
                                       const std::vector<int>& n_max_list,
                                       const SpectraOptions& opts = {});

}  // namespace klm
