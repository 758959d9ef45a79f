#include <doctest.h>

#include <bit>

#include "klm/transforms.hpp"

using namespace klm;

namespace {

ValidatedModel chain2(double t = 1.0, double J = 1.0, double U = 1.0, double g = 0.5,
                      double w0 = 1.0) {
    ExampleParams p;
    p.t = t; p.J = J; p.U = U; p.g = g; p.omega0 = w0;
    return validate(example_model("example1", 2, p));
}

// Full Fock space over n sites (every occupation, both spins); closed under
// the down-spin particle-hole map.
ElectronBasis full_fock(int n_lambda, int n_omega) {
    ElectronBasis b;
    int n = n_lambda + n_omega;
    b.order = {n_lambda, n};
    b.projection = Projection::none;
    b.n_up = -1;
    for (std::uint32_t u = 0; u < (1u << n); ++u)
        for (std::uint32_t d = 0; d < (1u << n); ++d) {
            b.index.emplace(ElectronConfig{u, d}.key(), b.configs.size());
            b.configs.push_back({u, d});
        }
    return b;
}

SpMat mode_matrix(const ElectronBasis& basis, bool create, int site, Spin spin) {
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        auto r = apply_fermion(create, site, spin, basis.order, basis.configs[i]);
        if (!r) continue;
        trips.emplace_back(int(*basis.find(r->first)), int(i), double(r->second));
    }
    SpMat M(Eigen::Index(basis.dim()), Eigen::Index(basis.dim()));
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

double max_abs(const SpMat& M) {
    double m = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

}  // namespace

TEST_CASE("hole-particle map") {
    auto model = chain2();
    ElectronBasis fock = full_fock(2, 2);
    UnitaryFactor u = hole_particle(model, fock);
    CHECK(u.unitarity_residual == 0.0);
    SUBCASE("signed permutation") {
        Eigen::VectorXi row_hits = Eigen::VectorXi::Zero(int(fock.dim()));
        for (int k = 0; k < u.matrix.outerSize(); ++k) {
            int col_hits = 0;
            for (SpMat::InnerIterator it(u.matrix, k); it; ++it) {
                CHECK(std::abs(std::abs(it.value()) - 1.0) == 0.0);
                CHECK(it.value().imag() == 0.0);
                ++col_hits;
                row_hits(it.row())++;
            }
            CHECK(col_hits == 1);
        }
        CHECK(row_hits.minCoeff() == 1);
        CHECK(row_hits.maxCoeff() == 1);
    }
    SUBCASE("square is a diagonal sign matrix") {
        SpMat sq = SpMat(u.matrix * u.matrix);
        for (int k = 0; k < sq.outerSize(); ++k)
            for (SpMat::InnerIterator it(sq, k); it; ++it) {
                CHECK(it.row() == it.col());
                CHECK(std::abs(std::abs(it.value()) - 1.0) < 1e-15);
            }
    }
    SUBCASE("conjugation relations hold exactly for every mode") {
        for (int site = 0; site < 4; ++site) {
            SpMat cu = mode_matrix(fock, false, site, Spin::up);
            SpMat cd = mode_matrix(fock, false, site, Spin::down);
            SpMat cu2 = SpMat(SpMat(u.matrix.adjoint() * cu) * u.matrix);
            CHECK(max_abs(SpMat(cu2 - cu)) == 0.0);
            double gamma = site < 2 ? model.gamma_lambda[site]
                                    : model.gamma_omega[site - 2] * model.sgn_j[site - 2];
            SpMat cd2 = SpMat(SpMat(u.matrix.adjoint() * cd) * u.matrix);
            CHECK(max_abs(SpMat(cd2 - SpMat(gamma * SpMat(cd.adjoint())))) == 0.0);
        }
    }
    SUBCASE("carries the singly-occupied sector onto the paired sector") {
        ElectronBasis none = enumerate_basis(2, 2, Projection::none);
        ElectronBasis p0 = enumerate_basis(2, 2, Projection::P0);
        ElectronBasis q0 = enumerate_basis(2, 2, Projection::Q0);
        UnitaryFactor uh = hole_particle(model, none);
        // U^dag (P0 projector) U = Q0 projector
        SpMat P(Eigen::Index(none.dim()), Eigen::Index(none.dim()));
        SpMat Q(Eigen::Index(none.dim()), Eigen::Index(none.dim()));
        std::vector<Eigen::Triplet<cplx>> pt, qt;
        for (auto& c : p0.configs) pt.emplace_back(int(*none.find(c)), int(*none.find(c)), 1.0);
        for (auto& c : q0.configs) qt.emplace_back(int(*none.find(c)), int(*none.find(c)), 1.0);
        P.setFromTriplets(pt.begin(), pt.end());
        Q.setFromTriplets(qt.begin(), qt.end());
        SpMat conj = SpMat(SpMat(uh.matrix.adjoint() * P) * uh.matrix);
        CHECK(max_abs(SpMat(conj - Q)) == 0.0);
    }
    SUBCASE("half-filled basis stays closed") {
        ElectronBasis none = enumerate_basis(2, 2, Projection::none);
        CHECK(hole_particle(model, none).unitarity_residual == 0.0);
    }
}

TEST_CASE("phase rotation") {
    BosonParams bp; bp.n_max = 7;
    BosonSpace bosons = build_boson_space(1, bp);
    UnitaryFactor r = phase_rotation(bosons);
    CHECK(r.unitarity_residual < 1e-14);
    SUBCASE("number-basis diagonal cycles through the fourth roots") {
        cplx want(1.0, 0.0);
        for (int n = 0; n <= 7; ++n) {
            CHECK(std::abs(r.matrix.coeff(n, n) - want) < 1e-15);
            want *= cplx(0.0, -1.0);
        }
        SpMat pow4 = SpMat(SpMat(r.matrix * r.matrix) * SpMat(r.matrix * r.matrix));
        CHECK(max_abs(SpMat(pow4 - bosons.identity())) < 1e-14);
    }
    SUBCASE("conjugation rotates position into momentum") {
        // R^dag q R = p away from the truncation edge
        Eigen::MatrixXcd R(r.matrix);
        Eigen::MatrixXcd got = R.adjoint() * bosons.q1 * R;
        Eigen::MatrixXcd diff = got - bosons.p1;
        CHECK(diff.topLeftCorner(6, 6).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("grid representation approximates the same rotation") {
        // the central-difference momentum agrees with the rotated position
        // only to second order in the spacing, so test the convergence rate
        auto rotation_error = [](int n_points) {
            BosonParams gp; gp.rep = BosonRep::grid; gp.n_points = n_points; gp.extent = 7.0;
            BosonSpace grid = build_boson_space(1, gp);
            UnitaryFactor rg = phase_rotation(grid);
            REQUIRE(rg.unitarity_residual < 1e-10);
            Eigen::MatrixXcd R(rg.matrix);
            Eigen::MatrixXcd got = R.adjoint() * Eigen::MatrixXcd(grid.q1) * R;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(grid.np1);
            Eigen::MatrixXcd low = es.eigenvectors().leftCols(10);
            return (low.adjoint() * (got - grid.p1) * low).cwiseAbs().maxCoeff();
        };
        double coarse = rotation_error(40);
        double fine = rotation_error(200);
        CHECK(coarse < 0.7);
        CHECK(fine < 0.03);
        CHECK(fine < coarse / 15.0);  // second order would give / 25
    }
}

TEST_CASE("density-conditioned displacement") {
    ElectronBasis none = enumerate_basis(2, 2, Projection::none);
    SUBCASE("zero coupling gives the identity") {
        BosonParams bp; bp.n_max = 3;
        BosonSpace bosons = build_boson_space(2, bp);
        UnitaryFactor lf = lang_firsov(chain2(1, 1, 1, 0), none, bosons);
        SpMat I(lf.matrix.rows(), lf.matrix.cols());
        I.setIdentity();
        CHECK(max_abs(SpMat(lf.matrix - I)) < 1e-14);
    }
    SUBCASE("annihilator picks up the density shift") {
        auto model = chain2();
        BosonParams bp; bp.n_max = 14;
        BosonSpace bosons = build_boson_space(2, bp);
        UnitaryFactor lf = lang_firsov(model, none, bosons);
        CHECK(lf.unitarity_residual < 1e-9);
        std::size_t db = bosons.dim();
        for (int y = 0; y < 2; ++y) {
            SpMat bfull = tensor(SpMat(Eigen::MatrixXcd::Identity(int(none.dim()),
                                                                   int(none.dim())).sparseView()),
                                 bosons.mode_op(y, bosons.b1));
            Eigen::MatrixXcd got = Eigen::MatrixXcd(
                SpMat(SpMat(lf.matrix.adjoint() * bfull) * lf.matrix));
            for (std::size_t i = 0; i < none.dim(); ++i) {
                double a = 0.0;
                for (int x = 0; x < 2; ++x) {
                    int occ = int((none.configs[i].up >> x) & 1u) +
                              int((none.configs[i].down >> x) & 1u);
                    a += model.spec.g(x, y) * occ;
                }
                Eigen::MatrixXcd want =
                    Eigen::MatrixXcd(bosons.mode_op(y, bosons.b1)) -
                    (a / model.spec.omega0) * Eigen::MatrixXcd::Identity(int(db), int(db));
                Eigen::MatrixXcd block =
                    got.block(Eigen::Index(i * db), Eigen::Index(i * db), int(db), int(db));
                // interior comparison: the truncation edge is unreliable
                std::vector<int> keep;
                for (std::size_t k = 0; k < db; ++k)
                    if (bosons.total_occupation(k) <= 3) keep.push_back(int(k));
                double err = 0.0;
                for (int r : keep)
                    for (int c : keep) err = std::max(err, std::abs(block(r, c) - want(r, c)));
                CHECK(err < 1e-5);
            }
        }
    }
    SUBCASE("commutes with the f-site operators") {
        auto model = chain2();
        BosonParams bp; bp.n_max = 4;
        BosonSpace bosons = build_boson_space(2, bp);
        UnitaryFactor lf = lang_firsov(model, none, bosons);
        SpMat fh = tensor(hop_op(none, 2, 3, Spin::up), bosons.identity());
        CHECK(max_abs(SpMat(lf.matrix * fh - fh * lf.matrix)) < 1e-12);
    }
}

TEST_CASE("frame identity residuals") {
    SUBCASE("exact without coupling") {
        auto rows = transformed_frame_residuals(chain2(1, 1, 1, 0), {4, 6});
        for (auto& r : rows) CHECK(r.residual < 1e-10);
    }
    SUBCASE("monotone truncation decay") {
        for (double g : {0.3, 0.5}) {
            auto rows = transformed_frame_residuals(chain2(1, 1, 1, g), {4, 6, 8});
            REQUIRE(rows.size() == 3);
            CHECK(rows[1].residual <= rows[0].residual + 1e-12);
            CHECK(rows[2].residual <= rows[1].residual + 1e-12);
            CHECK(rows[2].residual < rows[0].residual);
        }
    }
    SUBCASE("composed unitary is unitary within truncation") {
        ElectronBasis none = enumerate_basis(2, 2, Projection::none);
        BosonParams bp; bp.n_max = 6;
        BosonSpace bosons = build_boson_space(2, bp);
        SpMat U = frame_unitary(chain2(), none, bosons);
        SpMat G = SpMat(SpMat(U.adjoint()) * U);
        SpMat I(U.rows(), U.cols());
        I.setIdentity();
        CHECK(max_abs(SpMat(G - I)) < 1e-10);
    }
}
