#pragma once

#include <iosfwd>
#include <string>

#include "klm/fock.hpp"

namespace klm {

// Hermitian sparse operator: the upper triangle is the stored truth, the full
// matrix is its mirror. Additive constants are kept as an explicit scalar so
// exact operator identities can be compared without hidden shifts.
struct SparseHermitianOperator {
    std::size_t dim = 0;
    std::string domain;
    double constant = 0.0;
    std::vector<Eigen::Triplet<cplx>> upper;

    static SparseHermitianOperator from_matrix(const SpMat& M, std::string domain,
                                               double constant = 0.0);
    // Mirror of the stored upper triangle, without the constant.
    SpMat matrix() const;
    // matrix() + constant * I.
    SpMat total() const;
    void export_coo(std::ostream& os) const;
};

// Electron-sector building blocks. Sites are global indices in
// lambda-then-omega order; spin operators have the same form on both kinds.
SpMat number_op(const ElectronBasis& basis, int site, Spin spin);
SpMat hop_op(const ElectronBasis& basis, int x, int y, Spin spin);  // c^dag_x c_y
SpMat spin_pair_op(const ElectronBasis& basis, int a, int b);       // s_a^+ s_b^-
SpMat spin3_op(const ElectronBasis& basis, int site);
SpMat pair_hop_op(const ElectronBasis& basis, int x, int u);  // c^dag_up f_up c^dag_dn f_dn
SpMat kondo_op(const ElectronBasis& basis, int x, int u);     // s_x . S_u
SpMat s2_total(const ElectronBasis& basis);
SpMat s3_total(const ElectronBasis& basis);

// Individual spin raising/lowering operators move between S3 sectors, so the
// full set exists only on a free-S3 basis (enumerate_fixed_number_basis);
// on fixed-S3 bases only the sector-preserving members are filled.
struct SpinOperators {
    std::vector<SpMat> s_plus, s_minus;  // per site; empty on fixed-S3 bases
    std::vector<SpMat> n_up, n_dn;
    SpMat S3_tot, Splus_tot, Sminus_tot, S2_tot;
};

SpinOperators build_spin_operators(const ElectronBasis& basis);

// Physical Hamiltonian on basis x bosons: hopping + exchange + Coulomb +
// density-displacement coupling + phonon energy.
SparseHermitianOperator build_hamiltonian(const ValidatedModel& model, const ElectronBasis& basis,
                                          const BosonSpace& bosons);

// Components of the transformed Hamiltonian on the Q0 sector:
// H = R - J_op - U_tilde + Np_term, constant = -g^2 |lambda| / omega0.
struct OperatorBundle {
    SparseHermitianOperator H;
    SparseHermitianOperator R;
    SparseHermitianOperator J_op;
    SparseHermitianOperator U_tilde;
    SparseHermitianOperator Np_term;
    SpMat S2_tot, S3_tot;  // electron sector
};

OperatorBundle build_transformed(const ValidatedModel& model, const ElectronBasis& basis,
                                 const BosonSpace& bosons);

// exp(+i Phi_{x,y}) with Phi_{x,y} = (sqrt2/omega0) sum_z (g_xz - g_yz) q_z,
// on the boson space. Exact (diagonal) on the grid; computed from the
// truncated q on the number basis.
SpMat exp_i_phi(const ValidatedModel& model, const BosonSpace& bosons, int x, int y);

enum class AuxiliaryKind { K1, H_H, K_prime, H_H_prime, L2, L2_prime };

// The comparison Hamiltonians: pair-spin exchange (K1 / K_prime), the Hubbard
// comparators (H_H / H_H_prime), and their phonon-dressed restrictions
// (L2 = K1|P0 + omega0 Np, L2_prime likewise for K_prime).
SparseHermitianOperator build_auxiliary(AuxiliaryKind kind, const ValidatedModel& model,
                                        const ElectronBasis& basis,
                                        const BosonSpace* bosons = nullptr);

// min |J_{x,u}| over the nonzero couplings.
double min_nonzero_exchange(const ValidatedModel& model);

}  // namespace klm
