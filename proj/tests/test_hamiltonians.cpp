#include <doctest.h>

#include <algorithm>

#include "klm/transforms.hpp"

using namespace klm;

namespace {

ValidatedModel chain2(double t = 1.0, double J = 1.0, double U = 0.0, double g = 0.0,
                      double w0 = 1.0) {
    ExampleParams p;
    p.t = (t == 0.0) ? 1.0 : t;
    p.J = (J == 0.0) ? 1.0 : J;
    p.U = U; p.g = g; p.omega0 = w0;
    ValidatedModel m = validate(example_model("example1", 2, p));
    // connectivity and exchange checks only gate the theorems, not assembly;
    // zero out after validation so decoupled limits stay constructible
    if (t == 0.0) m.spec.t.setZero();
    if (J == 0.0) m.spec.J.setZero();
    return m;
}

Eigen::VectorXd spectrum(const SpMat& M) {
    Eigen::MatrixXcd D(M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(D);
    return es.eigenvalues();
}

double max_abs(const SpMat& M) {
    double m = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

}  // namespace

TEST_CASE("sparse hermitian container") {
    ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
    BosonParams bp; bp.n_max = 1;
    BosonSpace bosons = build_boson_space(2, bp);
    auto H = build_hamiltonian(chain2(1, 1, 1, 0.5), p0, bosons);
    CHECK(H.dim == p0.dim() * bosons.dim());
    SpMat M = H.matrix();
    CHECK(max_abs(SpMat(M - SpMat(M.adjoint()))) == 0.0);
    // the constant rides on total(), not matrix()
    auto shifted = SparseHermitianOperator::from_matrix(M, "test", 2.5);
    CHECK(max_abs(SpMat(shifted.total() - M)) == doctest::Approx(2.5));
    // non-Hermitian input rejected
    SpMat bad(2, 2);
    bad.insert(0, 1) = cplx(1.0, 0.0);
    CHECK_THROWS(SparseHermitianOperator::from_matrix(bad, "bad"));
}

TEST_CASE("decoupled limits of the physical Hamiltonian") {
    ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
    SUBCASE("free oscillators") {
        BosonParams bp; bp.n_max = 2;
        BosonSpace bosons = build_boson_space(2, bp);
        auto H = build_hamiltonian(chain2(0, 0, 0, 0, 1.3), p0, bosons);
        Eigen::VectorXd ev = spectrum(H.total());
        // spectrum = 1.3 * {0,1,2,...}, each phonon level repeated dim(p0) times
        std::vector<double> want;
        for (std::size_t k = 0; k < bosons.dim(); ++k)
            for (std::size_t e = 0; e < p0.dim(); ++e)
                want.push_back(1.3 * bosons.total_occupation(k));
        std::sort(want.begin(), want.end());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            CHECK(ev(i) == doctest::Approx(want[i]).epsilon(1e-12));
    }
    SUBCASE("g = 0 factorizes electron and phonon spectra") {
        BosonParams bp; bp.n_max = 3;
        BosonSpace b1m = build_boson_space(2, bp);
        auto model = chain2(1, 1, 0.7, 0);
        auto H = build_hamiltonian(model, p0, b1m);
        // electron spectrum from the phonon-vacuum block (boson index fastest)
        Eigen::MatrixXcd full = Eigen::MatrixXcd(H.total());
        Eigen::Index db = Eigen::Index(b1m.dim());
        Eigen::MatrixXcd vac(p0.dim(), p0.dim());
        for (Eigen::Index r = 0; r < vac.rows(); ++r)
            for (Eigen::Index c = 0; c < vac.cols(); ++c)
                vac(r, c) = full(r * db, c * db);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ves(vac);
        Eigen::VectorXd elec = ves.eigenvalues();
        std::vector<double> want;
        for (std::size_t k = 0; k < b1m.dim(); ++k)
            for (Eigen::Index e = 0; e < elec.size(); ++e)
                want.push_back(elec(e) + 1.0 * b1m.total_occupation(k));
        std::sort(want.begin(), want.end());
        Eigen::VectorXd ev = spectrum(H.total());
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            CHECK(ev(i) == doctest::Approx(want[i]).epsilon(1e-10));
    }
}

TEST_CASE("Kondo chain ground energy against an independently assembled matrix") {
    // t=1, J=1, U=g=0, no phonons: oracle built from raw operator strings
    ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
    std::vector<OperatorTerm> terms;
    for (Spin sp : {Spin::up, Spin::down}) {
        terms.push_back({-1.0, {{true, 0, sp}, {false, 1, sp}}});
        terms.push_back({-1.0, {{true, 1, sp}, {false, 0, sp}}});
    }
    auto add_kondo = [&](int x, int u) {
        // (s+ S- + s- S+)/2 + s3 S3 expanded into strings
        terms.push_back({0.5, {{true, x, Spin::up}, {false, x, Spin::down},
                               {true, u, Spin::down}, {false, u, Spin::up}}});
        terms.push_back({0.5, {{true, x, Spin::down}, {false, x, Spin::up},
                               {true, u, Spin::up}, {false, u, Spin::down}}});
        for (Spin a : {Spin::up, Spin::down})
            for (Spin b : {Spin::up, Spin::down}) {
                double za = (a == Spin::up) ? 0.5 : -0.5;
                double zb = (b == Spin::up) ? 0.5 : -0.5;
                terms.push_back({za * zb,
                                 {{true, x, a}, {false, x, a}, {true, u, b}, {false, u, b}}});
            }
    };
    add_kondo(0, 2);
    add_kondo(1, 3);
    Eigen::VectorXd oracle = spectrum(operator_matrix(p0, terms));

    // g = 0 so phonons only shift levels by whole multiples of omega0
    BosonParams bp; bp.n_max = 1;
    BosonSpace b1 = build_boson_space(2, bp);
    Eigen::VectorXd got = spectrum(build_hamiltonian(chain2(), p0, b1).total());
    std::vector<double> want;
    for (std::size_t k = 0; k < b1.dim(); ++k)
        for (Eigen::Index i = 0; i < oracle.size(); ++i)
            want.push_back(oracle(i) + 1.0 * b1.total_occupation(k));
    std::sort(want.begin(), want.end());
    REQUIRE(std::size_t(got.size()) == want.size());
    for (Eigen::Index i = 0; i < got.size(); ++i)
        CHECK(got(i) == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("electron-phonon term assembled independently") {
    ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
    BosonParams bp; bp.n_max = 2;
    BosonSpace bosons = build_boson_space(2, bp);
    auto model = chain2(1, 1, 0, 0.5);
    SpMat with = build_hamiltonian(model, p0, bosons).total();
    auto zero_g = model;
    zero_g.spec.g.setZero();
    SpMat without = build_hamiltonian(validate(zero_g.spec), p0, bosons).total();
    SpMat eph(with.rows(), with.cols());
    for (int x = 0; x < 2; ++x) {
        SpMat nx = SpMat(number_op(p0, x, Spin::up) + number_op(p0, x, Spin::down));
        for (int y = 0; y < 2; ++y) {
            Eigen::MatrixXcd bd = bosons.b1 + bosons.b1.adjoint().eval();
            eph += SpMat(model.spec.g(x, y) * tensor(nx, bosons.mode_op(y, bd)));
        }
    }
    CHECK(max_abs(SpMat(with - without - eph)) < 1e-14);
}

TEST_CASE("spin operators") {
    SUBCASE("su(2) algebra on the free-S3 basis") {
        ElectronBasis free_b = enumerate_fixed_number_basis(2, 2, 4);
        SpinOperators ops = build_spin_operators(free_b);
        SpMat comm = SpMat(ops.Splus_tot * ops.Sminus_tot - ops.Sminus_tot * ops.Splus_tot);
        CHECK(max_abs(SpMat(comm - SpMat(2.0 * ops.S3_tot))) < 1e-13);
        // S2 = (S+S- + S-S+)/2 + S3^2
        SpMat s2 = SpMat(
            SpMat(0.5 * (SpMat(ops.Splus_tot * ops.Sminus_tot) +
                         SpMat(ops.Sminus_tot * ops.Splus_tot))) +
            SpMat(ops.S3_tot * ops.S3_tot));
        CHECK(max_abs(SpMat(s2 - ops.S2_tot)) < 1e-13);
        // per-site raising against spin_pair diagonal member
        for (int x = 0; x < 4; ++x)
            CHECK(max_abs(SpMat(SpMat(ops.s_plus[x] * ops.s_minus[x]) -
                                spin_pair_op(free_b, x, x))) < 1e-14);
    }
    SUBCASE("S3 vanishes on the balanced sector") {
        ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
        CHECK(max_abs(s3_total(p0)) == 0.0);
        Eigen::VectorXd s2ev = spectrum(s2_total(p0));
        for (Eigen::Index i = 0; i < s2ev.size(); ++i) {
            double s = 0.5 * (std::sqrt(1.0 + 4.0 * std::max(0.0, s2ev(i))) - 1.0);
            CHECK(std::abs(s - std::round(2.0 * s) / 2.0) < 1e-9);
        }
    }
    SUBCASE("kondo_op against the componentwise dot product") {
        ElectronBasis free_b = enumerate_fixed_number_basis(2, 2, 4);
        SpinOperators ops = build_spin_operators(free_b);
        for (int x = 0; x < 2; ++x)
            for (int u = 2; u < 4; ++u) {
                SpMat dot = SpMat(
                    SpMat(0.5 * (SpMat(ops.s_plus[x] * ops.s_minus[u]) +
                                 SpMat(ops.s_minus[x] * ops.s_plus[u]))) +
                    SpMat(SpMat(spin3_op(free_b, x)) * spin3_op(free_b, u)));
                CHECK(max_abs(SpMat(kondo_op(free_b, x, u) - dot)) < 1e-14);
            }
    }
}

TEST_CASE("Hamiltonian symmetries") {
    ElectronBasis free_b = enumerate_fixed_number_basis(2, 2, 4);
    BosonParams bp; bp.n_max = 1;
    BosonSpace bosons = build_boson_space(2, bp);
    auto model = chain2(1, 1, 0.8, 0.4);
    // assemble on the free-S3 basis so the raising operators exist
    auto H = build_hamiltonian(model, free_b, bosons);
    SpinOperators ops = build_spin_operators(free_b);
    SpMat Hm = H.total();
    SpMat I = bosons.identity();
    for (const SpMat* S : {&ops.S3_tot, &ops.Splus_tot, &ops.Sminus_tot, &ops.S2_tot}) {
        SpMat Sf = tensor(*S, I);
        CHECK(max_abs(SpMat(Hm * Sf - Sf * Hm)) < 1e-10);
    }
}

TEST_CASE("transformed-frame components") {
    ElectronBasis q0 = enumerate_basis(2, 2, Projection::Q0);
    BosonParams bp; bp.n_max = 4;
    BosonSpace bosons = build_boson_space(2, bp);
    SUBCASE("exchange block is entrywise nonnegative") {
        auto bundle = build_transformed(chain2(1, 1, 1, 0.5), q0, bosons);
        SpMat J = bundle.J_op.total();
        double min_entry = 0.0;
        for (int k = 0; k < J.outerSize(); ++k)
            for (SpMat::InnerIterator it(J, k); it; ++it) {
                CHECK(std::abs(it.value().imag()) < 1e-14);
                min_entry = std::min(min_entry, it.value().real());
            }
        CHECK(min_entry >= 0.0);
    }
    SUBCASE("critical coupling kills the opposite-spin term") {
        auto bundle = build_transformed(chain2(1, 1, 1, 1), q0, bosons);
        CHECK(max_abs(bundle.U_tilde.total()) < 1e-14);
        CHECK(bundle.U_tilde.constant == 0.0);
    }
    SUBCASE("components add up to H") {
        auto bundle = build_transformed(chain2(1, 1, 1, 0.5), q0, bosons);
        SpMat sum = SpMat(SpMat(bundle.R.total() - bundle.J_op.total()) -
                          SpMat(bundle.U_tilde.total() - bundle.Np_term.total()));
        CHECK(max_abs(SpMat(bundle.H.matrix() - sum)) < 1e-13);
        // -g^2 |lambda| / omega0 with the common column sum g = 0.5
        CHECK(bundle.H.constant == doctest::Approx(-0.25 * 2.0));
    }
    SUBCASE("g = 0 transformed spectrum equals the physical spectrum") {
        ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
        auto model = chain2(1, 1, 0.6, 0);
        Eigen::VectorXd phys = spectrum(build_hamiltonian(model, p0, bosons).total());
        Eigen::VectorXd trans = spectrum(build_transformed(model, q0, bosons).H.total());
        for (Eigen::Index i = 0; i < phys.size(); ++i)
            CHECK(phys(i) == doctest::Approx(trans(i)).epsilon(1e-10));
    }
}

TEST_CASE("dressed phases") {
    auto model = chain2(1, 1, 0, 0.5);
    SUBCASE("grid representation is exactly unitary") {
        BosonParams bp; bp.rep = BosonRep::grid; bp.n_points = 24; bp.extent = 6.0;
        BosonSpace bosons = build_boson_space(2, bp);
        SpMat E = exp_i_phi(model, bosons, 0, 1);
        SpMat G = SpMat(SpMat(E.adjoint()) * E);
        CHECK(max_abs(SpMat(G - bosons.identity())) < 1e-14);
        // diagonal with the advertised phase at each grid point
        double kappa = std::sqrt(2.0) / model.spec.omega0;
        for (int a = 0; a < bosons.d; ++a)
            for (int b = 0; b < bosons.d; ++b) {
                double phi = kappa * ((model.spec.g(0, 0) - model.spec.g(1, 0)) * bosons.grid_q(a) +
                                      (model.spec.g(0, 1) - model.spec.g(1, 1)) * bosons.grid_q(b));
                CHECK(std::abs(E.coeff(a * bosons.d + b, a * bosons.d + b) -
                               std::exp(cplx(0, phi))) < 1e-13);
            }
    }
    SUBCASE("number representation approximately unitary, improving with n_max") {
        double prev = 1.0;
        for (int n_max : {4, 8, 12}) {
            BosonParams bp; bp.n_max = n_max;
            BosonSpace bosons = build_boson_space(2, bp);
            SpMat E = exp_i_phi(model, bosons, 0, 1);
            double defect = max_abs(SpMat(SpMat(SpMat(E.adjoint()) * E) - bosons.identity()));
            CHECK(defect <= prev + 1e-12);
            prev = defect;
        }
        CHECK(prev < 0.2);
    }
}

TEST_CASE("auxiliary Hamiltonians") {
    ElectronBasis none = enumerate_basis(2, 2, Projection::none);
    ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
    auto model = chain2(1, 1, 0.5, 0);
    SUBCASE("interaction-only Hubbard comparator is the half-filling diagonal") {
        auto flat = chain2(0, 0, 0, 0);
        // keep the exchange structure out by zeroing t and J entirely
        flat.spec.t.setZero();
        flat.spec.J.setZero();
        SpMat M = build_auxiliary(AuxiliaryKind::H_H, flat, none).total();
        for (std::size_t i = 0; i < none.dim(); ++i) {
            double want = 0.0;
            for (int s = 0; s < 4; ++s) {
                double nu = (none.configs[i].up >> s) & 1u;
                double nd = (none.configs[i].down >> s) & 1u;
                want += (nu - 0.5) * (nd - 0.5);
            }
            CHECK(std::abs(M.coeff(Eigen::Index(i), Eigen::Index(i)) - want) < 1e-14);
        }
    }
    SUBCASE("pair exchange preserves the projected sector") {
        // K1 assembled on P0 must close; escaping terms would throw
        SpMat K = build_auxiliary(AuxiliaryKind::K1, model, p0).total();
        CHECK(max_abs(SpMat(K - SpMat(K.adjoint()))) == 0.0);
        // pair terms raise and lower in step, so the magnetization is conserved
        SpMat S3 = s3_total(p0);
        CHECK(max_abs(SpMat(K * S3 - S3 * K)) < 1e-12);
    }
    SUBCASE("Hubbard ground spin equals the sublattice imbalance") {
        for (const char* kind : {"example1", "star"}) {
            auto m = validate(example_model(kind, kind[0] == 's' ? 4 : 2));
            ElectronBasis nb = enumerate_basis(m, Projection::none);
            SpMat M = build_auxiliary(AuxiliaryKind::H_H, m, nb).total();
            Eigen::MatrixXcd Md(M);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Md);
            VecC gs = es.eigenvectors().col(0);
            double s2 = std::real(gs.dot(s2_total(nb) * gs));
            int a = 0, b = 0;
            for (auto& s : m.spec.lambda) (s.sublattice == 1 ? a : b)++;
            for (auto& s : m.spec.omega) (s.sublattice == 1 ? a : b)++;
            double spin = 0.5 * std::abs(a - b);
            CHECK(s2 == doctest::Approx(spin * (spin + 1.0)).epsilon(1e-8));
        }
    }
    SUBCASE("phonon-dressed comparator") {
        BosonParams bp; bp.n_max = 2;
        BosonSpace bosons = build_boson_space(2, bp);
        SpMat L2 = build_auxiliary(AuxiliaryKind::L2, model, p0, &bosons).total();
        SpMat Ie(Eigen::Index(p0.dim()), Eigen::Index(p0.dim()));
        Ie.setIdentity();
        SpMat want = SpMat(tensor(build_auxiliary(AuxiliaryKind::K1, model, p0).total(),
                                  bosons.identity()) +
                           SpMat(model.spec.omega0 * tensor(Ie, bosons.n_p())));
        CHECK(max_abs(SpMat(L2 - want)) < 1e-13);
    }
    SUBCASE("minimum nonzero exchange") {
        auto m = chain2(1, -2.5, 0, 0);
        CHECK(min_nonzero_exchange(m) == 2.5);
    }
}
