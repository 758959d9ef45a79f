#include "klm/transforms.hpp"

#include <Eigen/Eigenvalues>
#include <map>

namespace klm {

namespace {

double max_abs(const SpMat& M) {
    double m = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
}

double unitarity_defect(const SpMat& U) {
    SpMat G = SpMat(U.adjoint() * U);
    SpMat I(U.rows(), U.cols());
    I.setIdentity();
    return max_abs(SpMat(G - I));
}

SpMat sparse_identity(std::size_t n) {
    SpMat I(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    I.setIdentity();
    return I;
}

// Kronecker chain over all modes, mode 0 slowest.
SpMat mode_chain(const BosonSpace& bosons, const std::vector<Eigen::MatrixXcd>& factors) {
    SpMat out = factors.front().sparseView();
    for (int m = 1; m < bosons.modes; ++m) out = tensor(out, SpMat(factors[m].sparseView()));
    return out;
}

}  // namespace

UnitaryFactor hole_particle(const ValidatedModel& model, const ElectronBasis& basis) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int ns = spec.n_sites();
    if (basis.order.n_sites != ns || basis.order.n_lambda != nl)
        throw BasisMismatch("hole_particle: basis built for a different model");

    // Elementary factor at down mode m is t_m c^dag_m + c_m; with an even
    // number of down modes the conjugation comes out as c_m -> -t_m c^dag_m.
    std::vector<double> t(ns);
    for (int x = 0; x < nl; ++x) t[x] = -model.gamma_lambda[x];
    for (int u = 0; u < spec.n_omega(); ++u) t[nl + u] = -model.gamma_omega[u] * model.sgn_j[u];

    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(basis.dim());
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        ElectronConfig c = basis.configs[i];
        double coeff = 1.0;
        // Product over sites in ascending order, rightmost factor first.
        for (int site = ns - 1; site >= 0; --site) {
            bool occupied = (c.down >> site) & 1u;
            auto step = apply_fermion(!occupied, site, Spin::down, basis.order, c);
            c = step->first;
            coeff *= step->second;
            if (!occupied) coeff *= t[site];
        }
        auto j = basis.find(c);
        if (!j) throw BasisMismatch("hole_particle: basis not closed under the down-spin flip");
        trips.emplace_back(static_cast<int>(*j), static_cast<int>(i), cplx(coeff, 0.0));
    }
    SpMat U(static_cast<Eigen::Index>(basis.dim()), static_cast<Eigen::Index>(basis.dim()));
    U.setFromTriplets(trips.begin(), trips.end());
    return {"hole-particle", U, unitarity_defect(U)};
}

UnitaryFactor lang_firsov(const ValidatedModel& model, const ElectronBasis& basis,
                          const BosonSpace& bosons) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    if (bosons.modes != nl)
        throw BasisMismatch("lang_firsov: expected one boson mode per conduction site");
    const double kappa = std::sqrt(2.0) / spec.omega0;
    const std::size_t db = bosons.dim();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(bosons.p1);
    const Eigen::MatrixXcd V = es.eigenvectors();
    const Eigen::VectorXd lam = es.eigenvalues();

    std::map<double, Eigen::MatrixXcd> disp;  // alpha -> exp(i alpha p)
    auto displacement = [&](double alpha) -> const Eigen::MatrixXcd& {
        auto it = disp.find(alpha);
        if (it != disp.end()) return it->second;
        Eigen::VectorXcd ph(lam.size());
        for (Eigen::Index k = 0; k < lam.size(); ++k) ph(k) = std::exp(cplx(0.0, alpha * lam(k)));
        Eigen::MatrixXcd E = V * ph.asDiagonal() * V.adjoint();
        return disp.emplace(alpha, std::move(E)).first->second;
    };

    std::map<std::vector<double>, SpMat> blocks;
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const ElectronConfig& c = basis.configs[i];
        std::vector<double> alpha(nl);
        for (int y = 0; y < nl; ++y) {
            double a = 0.0;
            for (int x = 0; x < nl; ++x) {
                int occ = int((c.up >> x) & 1u) + int((c.down >> x) & 1u);
                a += spec.g(x, y) * occ;
            }
            alpha[y] = kappa * a;
        }
        auto bit = blocks.find(alpha);
        if (bit == blocks.end()) {
            std::vector<Eigen::MatrixXcd> factors(nl);
            for (int y = 0; y < nl; ++y) factors[y] = displacement(alpha[y]);
            bit = blocks.emplace(alpha, mode_chain(bosons, factors)).first;
        }
        const SpMat& B = bit->second;
        const Eigen::Index base = static_cast<Eigen::Index>(i * db);
        for (int k = 0; k < B.outerSize(); ++k)
            for (SpMat::InnerIterator it(B, k); it; ++it)
                trips.emplace_back(base + it.row(), base + it.col(), it.value());
    }
    SpMat U(static_cast<Eigen::Index>(basis.dim() * db),
            static_cast<Eigen::Index>(basis.dim() * db));
    U.setFromTriplets(trips.begin(), trips.end());
    return {"lang-firsov", U, unitarity_defect(U)};
}

UnitaryFactor phase_rotation(const BosonSpace& bosons) {
    Eigen::MatrixXcd E;
    if (bosons.rep == BosonRep::number) {
        E = Eigen::MatrixXcd::Zero(bosons.d, bosons.d);
        cplx v(1.0, 0.0);
        for (int n = 0; n < bosons.d; ++n) {
            E(n, n) = v;
            v *= cplx(0.0, -1.0);
        }
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(bosons.np1);
        Eigen::VectorXcd ph(bosons.d);
        for (int k = 0; k < bosons.d; ++k)
            ph(k) = std::exp(cplx(0.0, -0.5 * M_PI * es.eigenvalues()(k)));
        E = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    }
    std::vector<Eigen::MatrixXcd> factors(bosons.modes, E);
    SpMat U = mode_chain(bosons, factors);
    return {"phase-rotation", U, unitarity_defect(U)};
}

SpMat frame_unitary(const ValidatedModel& model, const ElectronBasis& basis,
                    const BosonSpace& bosons) {
    SpMat Uhp = tensor(hole_particle(model, basis).matrix, sparse_identity(bosons.dim()));
    SpMat Ph = tensor(sparse_identity(basis.dim()), phase_rotation(bosons).matrix);
    SpMat Lf = lang_firsov(model, basis, bosons).matrix;
    return SpMat(Lf * SpMat(Ph * Uhp));
}

std::vector<FrameResidualRow> transformed_frame_residuals(const ValidatedModel& model,
                                                          const std::vector<int>& n_max_list) {
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    ElectronBasis none = enumerate_basis(nl, no, Projection::none);
    ElectronBasis q0 = enumerate_basis(nl, no, Projection::Q0);

    std::vector<FrameResidualRow> rows;
    for (int n_max : n_max_list) {
        BosonParams bp;
        bp.rep = BosonRep::number;
        bp.n_max = n_max;
        BosonSpace bosons = build_boson_space(nl, bp);
        const std::size_t db = bosons.dim();

        SpMat H = build_hamiltonian(model, none, bosons).total();
        SpMat U = frame_unitary(model, none, bosons);
        SpMat A = SpMat(SpMat(U.adjoint() * H) * U);

        // Selection onto the transformed sector (x) bosons.
        std::vector<Eigen::Triplet<cplx>> strips;
        for (std::size_t j = 0; j < q0.dim(); ++j) {
            std::size_t i = *none.find(q0.configs[j]);
            for (std::size_t k = 0; k < db; ++k)
                strips.emplace_back(static_cast<int>(i * db + k), static_cast<int>(j * db + k),
                                    cplx(1.0, 0.0));
        }
        SpMat S(static_cast<Eigen::Index>(none.dim() * db),
                static_cast<Eigen::Index>(q0.dim() * db));
        S.setFromTriplets(strips.begin(), strips.end());
        SpMat Aq = SpMat(SpMat(S.adjoint() * A) * S);

        OperatorBundle bundle = build_transformed(model, q0, bosons);
        Eigen::MatrixXcd diff = Eigen::MatrixXcd(Aq) - Eigen::MatrixXcd(bundle.H.total());

        // Compress to phonon occupation <= n_max/2 on both sides; entries near
        // the truncation edge are displacement artifacts, not identity failures.
        double residual = 0.0;
        for (Eigen::Index c = 0; c < diff.cols(); ++c) {
            if (2 * bosons.total_occupation(std::size_t(c) % db) > n_max) continue;
            for (Eigen::Index r = 0; r < diff.rows(); ++r) {
                if (2 * bosons.total_occupation(std::size_t(r) % db) > n_max) continue;
                residual = std::max(residual, std::abs(diff(r, c)));
            }
        }
        rows.push_back({n_max, residual});
    }
    return rows;
}

}  // namespace klm
