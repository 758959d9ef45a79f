#pragma once

#include "klm/operators.hpp"

namespace klm {

struct UnitaryFactor {
    std::string kind;
    SpMat matrix;
    double unitarity_residual = 0.0;  // max |U^dag U - I|
};

// Particle-hole map on the down spins: conjugation sends c_dn on a conduction
// site to gamma c^dag_dn, f_dn to gamma sgn(J) f^dag_dn, and leaves the up
// operators alone. Built as a product of one elementary factor per down mode,
// so the matrix is a signed permutation of the basis. Throws BasisMismatch
// when complementing a down mask leaves the basis.
UnitaryFactor hole_particle(const ValidatedModel& model, const ElectronBasis& basis);

// exp(i (sqrt2/omega0) sum_{x,y} g_xy n_x^c p_y) on electron (x) boson space:
// block diagonal over electron configs, a product of per-mode displacements
// within each block.
UnitaryFactor lang_firsov(const ValidatedModel& model, const ElectronBasis& basis,
                          const BosonSpace& bosons);

// exp(-i pi N_p / 2) on the boson space. Exact diagonal in the number
// representation, spectral exponential on the grid.
UnitaryFactor phase_rotation(const BosonSpace& bosons);

// The composed unitary on electron (x) boson space whose conjugation carries
// the physical Hamiltonian into the transformed frame: displacement * phase
// rotation * particle-hole, rightmost factor acting first.
SpMat frame_unitary(const ValidatedModel& model, const ElectronBasis& basis,
                    const BosonSpace& bosons);

struct FrameResidualRow {
    int n_max;
    double residual;
};

// Conjugates the physical Hamiltonian by the composed unitary, restricts to
// the transformed sector, and compares against the directly assembled
// transformed operator. The residual at each truncation level is the largest
// matrix-element difference after compressing both sides to phonon occupation
// at or below n_max / 2, where the truncation should not yet bite.
std::vector<FrameResidualRow> transformed_frame_residuals(const ValidatedModel& model,
                                                          const std::vector<int>& n_max_list);

}  // namespace klm
