#include "klm/operators.hpp"

#include <cmath>
#include <ostream>

namespace klm {

namespace {

SpMat diag_from_values(const Eigen::VectorXd& values) {
    const int n = static_cast<int>(values.size());
    SpMat M(n, n);
    for (int i = 0; i < n; ++i)
        if (values(i) != 0.0) M.insert(i, i) = values(i);
    M.makeCompressed();
    return M;
}

double occ(const ElectronConfig& c, int site, Spin s) {
    std::uint32_t mask = s == Spin::up ? c.up : c.down;
    return double((mask >> site) & 1u);
}

SpMat electron_identity(const ElectronBasis& basis) {
    SpMat id(static_cast<int>(basis.dim()), static_cast<int>(basis.dim()));
    id.setIdentity();
    return id;
}

}  // namespace

SparseHermitianOperator SparseHermitianOperator::from_matrix(const SpMat& M, std::string domain,
                                                             double constant) {
    if (M.rows() != M.cols()) throw BasisMismatch("operator must be square");
    SpMat diff = SpMat(M - SpMat(M.adjoint()));
    double scale = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SpMat::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > 1e-12 * (1.0 + scale))
                throw BasisMismatch("matrix is not Hermitian: " + domain);

    SparseHermitianOperator out;
    out.dim = static_cast<std::size_t>(M.rows());
    out.domain = std::move(domain);
    out.constant = constant;
    // Keep the upper triangle; average the two triangles so the mirror is
    // exact even after floating-point assembly.
    SpMat sym = SpMat(0.5 * (M + SpMat(M.adjoint())));
    for (int k = 0; k < sym.outerSize(); ++k)
        for (SpMat::InnerIterator it(sym, k); it; ++it) {
            if (it.row() > it.col()) continue;
            cplx v = it.value();
            if (it.row() == it.col()) v = cplx(v.real(), 0.0);
            if (v != cplx(0)) out.upper.emplace_back(it.row(), it.col(), v);
        }
    return out;
}

SpMat SparseHermitianOperator::matrix() const {
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(2 * upper.size());
    for (const auto& t : upper) {
        trips.push_back(t);
        if (t.row() != t.col()) trips.emplace_back(t.col(), t.row(), std::conj(t.value()));
    }
    SpMat M(static_cast<int>(dim), static_cast<int>(dim));
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

SpMat SparseHermitianOperator::total() const {
    SpMat M = matrix();
    if (constant != 0.0) {
        SpMat id(static_cast<int>(dim), static_cast<int>(dim));
        id.setIdentity();
        M += SpMat(constant * id);
    }
    return M;
}

void SparseHermitianOperator::export_coo(std::ostream& os) const {
    SpMat M = matrix();
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' '
               << it.value().imag() << '\n';
}

SpMat number_op(const ElectronBasis& basis, int site, Spin spin) {
    Eigen::VectorXd d(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) d(static_cast<int>(i)) = occ(basis.configs[i], site, spin);
    return diag_from_values(d);
}

SpMat hop_op(const ElectronBasis& basis, int x, int y, Spin spin) {
    return operator_matrix(basis, {{1.0, {{true, x, spin}, {false, y, spin}}}});
}

SpMat spin_pair_op(const ElectronBasis& basis, int a, int b) {
    // s_a^+ s_b^- = c^dag_{a up} c_{a dn} c^dag_{b dn} c_{b up}
    return operator_matrix(basis, {{1.0,
                                    {{true, a, Spin::up},
                                     {false, a, Spin::down},
                                     {true, b, Spin::down},
                                     {false, b, Spin::up}}}});
}

SpMat spin3_op(const ElectronBasis& basis, int site) {
    Eigen::VectorXd d(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& c = basis.configs[i];
        d(static_cast<int>(i)) = 0.5 * (occ(c, site, Spin::up) - occ(c, site, Spin::down));
    }
    return diag_from_values(d);
}

SpMat pair_hop_op(const ElectronBasis& basis, int x, int u) {
    return operator_matrix(basis, {{1.0,
                                    {{true, x, Spin::up},
                                     {false, u, Spin::up},
                                     {true, x, Spin::down},
                                     {false, u, Spin::down}}}});
}

SpMat kondo_op(const ElectronBasis& basis, int x, int u) {
    // s_x . S_u = (s_x^+ S_u^- + s_x^- S_u^+)/2 + s_x^3 S_u^3
    SpMat sp = spin_pair_op(basis, x, u);
    SpMat s3 = SpMat(spin3_op(basis, x) * spin3_op(basis, u));
    return SpMat(0.5 * (sp + SpMat(sp.adjoint())) + s3);
}

SpMat s3_total(const ElectronBasis& basis) {
    const int n_sites = basis.order.n_sites;
    SpMat total(static_cast<int>(basis.dim()), static_cast<int>(basis.dim()));
    for (int a = 0; a < n_sites; ++a) total += spin3_op(basis, a);
    return total;
}

SpMat s2_total(const ElectronBasis& basis) {
    const int n_sites = basis.order.n_sites;
    SpMat total(static_cast<int>(basis.dim()), static_cast<int>(basis.dim()));
    for (int a = 0; a < n_sites; ++a)
        for (int b = 0; b < n_sites; ++b) {
            SpMat pm = spin_pair_op(basis, a, b);
            total += SpMat(0.5 * (pm + SpMat(pm.adjoint())));
        }
    SpMat s3 = s3_total(basis);
    total += SpMat(s3 * s3);
    return total;
}

SpinOperators build_spin_operators(const ElectronBasis& basis) {
    SpinOperators ops;
    const int n_sites = basis.order.n_sites;
    const int dim = static_cast<int>(basis.dim());
    for (int a = 0; a < n_sites; ++a) {
        ops.n_up.push_back(number_op(basis, a, Spin::up));
        ops.n_dn.push_back(number_op(basis, a, Spin::down));
    }
    ops.S3_tot = s3_total(basis);
    if (basis.n_up < 0) {
        // Free-S3 basis: the raising/lowering operators are square here.
        ops.Splus_tot = SpMat(dim, dim);
        for (int a = 0; a < n_sites; ++a) {
            SpMat sp = operator_matrix(basis, {{1.0, {{true, a, Spin::up}, {false, a, Spin::down}}}});
            ops.s_plus.push_back(sp);
            ops.s_minus.push_back(SpMat(sp.adjoint()));
            ops.Splus_tot += sp;
        }
        ops.Sminus_tot = SpMat(ops.Splus_tot.adjoint());
        ops.S2_tot = SpMat(0.5 * (SpMat(ops.Splus_tot * ops.Sminus_tot) +
                                  SpMat(ops.Sminus_tot * ops.Splus_tot)) +
                           SpMat(ops.S3_tot * ops.S3_tot));
    } else {
        ops.S2_tot = s2_total(basis);
    }
    return ops;
}

SparseHermitianOperator build_hamiltonian(const ValidatedModel& model, const ElectronBasis& basis,
                                          const BosonSpace& bosons) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    if (basis.order.n_lambda != nl || basis.order.n_sites != nl + no)
        throw BasisMismatch("basis does not match the model");
    if (bosons.modes != nl) throw BasisMismatch("boson space needs one mode per conduction site");

    SpMat ib = bosons.identity();
    const int dim_e = static_cast<int>(basis.dim());
    SpMat He(dim_e, dim_e);

    for (int x = 0; x < nl; ++x)
        for (int y = 0; y < nl; ++y) {
            if (x == y || spec.t(x, y) == 0.0) continue;
            SpMat hop = SpMat(hop_op(basis, x, y, Spin::up) + hop_op(basis, x, y, Spin::down));
            He += SpMat(cplx(-spec.t(x, y)) * hop);
        }
    for (int x = 0; x < nl; ++x)
        for (int u = 0; u < no; ++u)
            if (spec.J(x, u) != 0.0) He += SpMat(cplx(spec.J(x, u)) * kondo_op(basis, x, nl + u));

    Eigen::VectorXd coulomb(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& c = basis.configs[i];
        double v = 0.0;
        for (int x = 0; x < nl; ++x) {
            double nx = occ(c, x, Spin::up) + occ(c, x, Spin::down) - 1.0;
            for (int y = 0; y < nl; ++y) {
                if (spec.U(x, y) == 0.0) continue;
                double ny = occ(c, y, Spin::up) + occ(c, y, Spin::down) - 1.0;
                v += spec.U(x, y) * nx * ny;
            }
        }
        coulomb(static_cast<int>(i)) = v;
    }
    He += diag_from_values(coulomb);

    SpMat H = tensor(He, ib);

    // Electron-phonon: sum_y (sum_x g_{x,y} n_x^c) x (b_y^dag + b_y).
    for (int y = 0; y < nl; ++y) {
        Eigen::VectorXd dens = Eigen::VectorXd::Zero(basis.dim());
        bool any = false;
        for (int x = 0; x < nl; ++x) {
            if (spec.g(x, y) == 0.0) continue;
            any = true;
            for (std::size_t i = 0; i < basis.dim(); ++i)
                dens(static_cast<int>(i)) +=
                    spec.g(x, y) * (occ(basis.configs[i], x, Spin::up) +
                                    occ(basis.configs[i], x, Spin::down));
        }
        if (!any) continue;
        Eigen::MatrixXcd displ = bosons.b1 + bosons.b1.adjoint().eval();
        H += tensor(diag_from_values(dens), bosons.mode_op(y, displ));
    }

    H += tensor(electron_identity(basis), SpMat(cplx(spec.omega0) * bosons.n_p()));

    return SparseHermitianOperator::from_matrix(H, "electron(" + std::to_string(dim_e) +
                                                        ") x phonon(" +
                                                        std::to_string(bosons.dim()) + ")");
}

SpMat exp_i_phi(const ValidatedModel& model, const BosonSpace& bosons, int x, int y) {
    const ModelSpec& spec = model.spec;
    const double c = std::sqrt(2.0) / spec.omega0;
    if (bosons.rep == BosonRep::grid) {
        std::vector<Eigen::VectorXcd> per_mode(bosons.modes);
        for (int z = 0; z < bosons.modes; ++z) {
            double a = spec.g(x, z) - spec.g(y, z);
            per_mode[z] = (cplx(0, 1) * c * a * bosons.grid_q.cast<cplx>()).array().exp();
        }
        return bosons.diagonal_op(per_mode);
    }
    // Number basis: unitary exponentials of the truncated per-mode q.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(bosons.q1);
    SpMat result = bosons.identity();
    for (int z = 0; z < bosons.modes; ++z) {
        double a = spec.g(x, z) - spec.g(y, z);
        if (a == 0.0) continue;
        Eigen::VectorXcd phase =
            (cplx(0, 1) * c * a * es.eigenvalues().cast<cplx>()).array().exp();
        Eigen::MatrixXcd u =
            es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
        result = SpMat(result * bosons.mode_op(z, u));
    }
    return result;
}

OperatorBundle build_transformed(const ValidatedModel& model, const ElectronBasis& basis,
                                 const BosonSpace& bosons) {
    if (basis.projection != Projection::Q0)
        throw BasisMismatch("transformed operators live on the Q0 sector");
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    const int dim_e = static_cast<int>(basis.dim());
    const std::size_t dim = basis.dim() * bosons.dim();
    std::string domain = "Q0(" + std::to_string(dim_e) + ") x phonon(" +
                         std::to_string(bosons.dim()) + ")";
    SpMat ib = bosons.identity();
    Eigen::MatrixXd u_eff = effective_coulomb(model);

    // R: hopping dressed with displacement phases, exchange-density coupling,
    // same-spin effective Coulomb.
    SpMat R(static_cast<int>(dim), static_cast<int>(dim));
    for (int x = 0; x < nl; ++x)
        for (int y = 0; y < nl; ++y) {
            if (x == y || spec.t(x, y) == 0.0) continue;
            SpMat phi = exp_i_phi(model, bosons, x, y);
            R += SpMat(cplx(-spec.t(x, y)) *
                       (tensor(hop_op(basis, x, y, Spin::up), phi) +
                        tensor(hop_op(basis, x, y, Spin::down), SpMat(phi.adjoint()))));
        }
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& cfg = basis.configs[i];
        double v = 0.0;
        for (int x = 0; x < nl; ++x) {
            double nxc = occ(cfg, x, Spin::up) + occ(cfg, x, Spin::down) - 1.0;
            for (int u = 0; u < no; ++u) {
                if (spec.J(x, u) == 0.0) continue;
                double nuf = occ(cfg, nl + u, Spin::up) + occ(cfg, nl + u, Spin::down) - 1.0;
                v += 0.25 * spec.J(x, u) * nxc * nuf;
            }
            for (int y = 0; y < nl; ++y) {
                if (u_eff(x, y) == 0.0) continue;
                v += u_eff(x, y) * (occ(cfg, x, Spin::up) * occ(cfg, y, Spin::up) +
                                    occ(cfg, x, Spin::down) * occ(cfg, y, Spin::down));
            }
        }
        diag(static_cast<int>(i)) = v;
    }
    R += tensor(diag_from_values(diag), ib);

    // Pair hopping between conduction and f sites.
    SpMat Je(dim_e, dim_e);
    for (int x = 0; x < nl; ++x)
        for (int u = 0; u < no; ++u) {
            if (spec.J(x, u) == 0.0) continue;
            SpMat v = pair_hop_op(basis, x, nl + u);
            Je += SpMat(cplx(0.5 * std::abs(spec.J(x, u))) * (v + SpMat(v.adjoint())));
        }

    Eigen::VectorXd ut = Eigen::VectorXd::Zero(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& cfg = basis.configs[i];
        double v = 0.0;
        for (int x = 0; x < nl; ++x)
            for (int y = 0; y < nl; ++y)
                if (u_eff(x, y) != 0.0)
                    v += 2.0 * u_eff(x, y) * occ(cfg, x, Spin::up) * occ(cfg, y, Spin::down);
        ut(static_cast<int>(i)) = v;
    }

    OperatorBundle bundle;
    bundle.R = SparseHermitianOperator::from_matrix(R, domain);
    bundle.J_op = SparseHermitianOperator::from_matrix(tensor(Je, ib), domain);
    bundle.U_tilde = SparseHermitianOperator::from_matrix(tensor(diag_from_values(ut), ib), domain);
    bundle.Np_term = SparseHermitianOperator::from_matrix(
        tensor(electron_identity(basis), SpMat(cplx(spec.omega0) * bosons.n_p())), domain);
    double gsum = model.common_g_column_sum;
    SpMat Hm = SpMat(R - bundle.J_op.matrix() - bundle.U_tilde.matrix() + bundle.Np_term.matrix());
    bundle.H = SparseHermitianOperator::from_matrix(Hm, domain, -gsum * gsum * nl / spec.omega0);
    bundle.S2_tot = s2_total(basis);
    bundle.S3_tot = s3_total(basis);
    return bundle;
}

double min_nonzero_exchange(const ValidatedModel& model) {
    double j = 0.0;
    const Eigen::MatrixXd& J = model.spec.J;
    for (int x = 0; x < J.rows(); ++x)
        for (int u = 0; u < J.cols(); ++u)
            if (J(x, u) != 0.0) j = j == 0.0 ? std::abs(J(x, u)) : std::min(j, std::abs(J(x, u)));
    return j;
}

namespace {

Eigen::VectorXd half_filling_interaction(const ElectronBasis& basis) {
    // sum over all sites of (n_up - 1/2)(n_dn - 1/2)
    Eigen::VectorXd d(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const auto& c = basis.configs[i];
        double v = 0.0;
        for (int a = 0; a < basis.order.n_sites; ++a)
            v += (occ(c, a, Spin::up) - 0.5) * (occ(c, a, Spin::down) - 0.5);
        d(static_cast<int>(i)) = v;
    }
    return d;
}

SpMat k1_matrix(const ValidatedModel& model, const ElectronBasis& basis, bool prime) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    const int dim = static_cast<int>(basis.dim());
    SpMat K(dim, dim);
    // SU(2)-invariant exchange: the spin rotation symmetry is what lets the
    // ground-state overlap argument transfer the total spin to H itself
    for (int x = 0; x < nl; ++x)
        for (int y = 0; y < nl; ++y) {
            if (spec.t(x, y) == 0.0) continue;
            K += SpMat(cplx(spec.t(x, y) * spec.t(x, y)) * kondo_op(basis, x, y));
        }
    for (int x = 0; x < nl; ++x)
        for (int u = 0; u < no; ++u) {
            double w;
            if (prime) {
                // Unit exchange on the matching-sublattice pairs.
                w = spec.lambda[x].sublattice == spec.omega[u].sublattice ? 1.0 : 0.0;
            } else {
                w = spec.J(x, u) * spec.J(x, u);
            }
            if (w == 0.0) continue;
            K += SpMat(cplx(2.0 * w) * kondo_op(basis, x, nl + u));
        }
    K += diag_from_values(half_filling_interaction(basis));
    return K;
}

SpMat hubbard_matrix(const ValidatedModel& model, const ElectronBasis& basis, bool prime) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    const int dim = static_cast<int>(basis.dim());
    SpMat H(dim, dim);
    const double hop_sign = prime ? 1.0 : -1.0;
    for (int x = 0; x < nl; ++x)
        for (int y = 0; y < nl; ++y) {
            if (x == y || spec.t(x, y) == 0.0) continue;
            H += SpMat(cplx(hop_sign * spec.t(x, y)) *
                       (hop_op(basis, x, y, Spin::up) + hop_op(basis, x, y, Spin::down)));
        }
    for (int x = 0; x < nl; ++x)
        for (int u = 0; u < no; ++u) {
            double w;
            if (prime) {
                w = spec.lambda[x].sublattice == spec.omega[u].sublattice ? 1.0 : 0.0;
            } else {
                w = -spec.J(x, u);
            }
            if (w == 0.0) continue;
            SpMat hops = SpMat(hop_op(basis, x, nl + u, Spin::up) +
                               hop_op(basis, x, nl + u, Spin::down));
            H += SpMat(cplx(w) * (hops + SpMat(hops.adjoint())));
        }
    H += diag_from_values(half_filling_interaction(basis));
    return H;
}

}  // namespace

SparseHermitianOperator build_auxiliary(AuxiliaryKind kind, const ValidatedModel& model,
                                        const ElectronBasis& basis, const BosonSpace* bosons) {
    const int dim_e = static_cast<int>(basis.dim());
    switch (kind) {
        case AuxiliaryKind::K1:
        case AuxiliaryKind::K_prime:
            return SparseHermitianOperator::from_matrix(
                k1_matrix(model, basis, kind == AuxiliaryKind::K_prime),
                "electron(" + std::to_string(dim_e) + ")");
        case AuxiliaryKind::H_H:
        case AuxiliaryKind::H_H_prime:
            if (basis.projection != Projection::none)
                throw BasisMismatch("Hubbard comparators live on the unprojected sector");
            return SparseHermitianOperator::from_matrix(
                hubbard_matrix(model, basis, kind == AuxiliaryKind::H_H_prime),
                "electron(" + std::to_string(dim_e) + ")");
        case AuxiliaryKind::L2:
        case AuxiliaryKind::L2_prime: {
            if (basis.projection != Projection::P0)
                throw BasisMismatch("phonon-dressed comparator lives on the P0 sector");
            if (!bosons) throw BasisMismatch("phonon-dressed comparator needs a boson space");
            SpMat K = k1_matrix(model, basis, kind == AuxiliaryKind::L2_prime);
            SpMat L = tensor(K, bosons->identity()) +
                      tensor(electron_identity(basis),
                             SpMat(cplx(model.spec.omega0) * bosons->n_p()));
            return SparseHermitianOperator::from_matrix(
                L, "P0(" + std::to_string(dim_e) + ") x phonon(" +
                       std::to_string(bosons->dim()) + ")");
        }
    }
    throw BasisMismatch("unknown auxiliary kind");
}

}  // namespace klm
