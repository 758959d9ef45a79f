#include "klm/spectra.hpp"

#include <Eigen/Eigenvalues>
#include <random>

namespace klm {

HermOp HermOp::from_sparse(const SpMat& M, double constant) {
    if (M.rows() != M.cols()) throw BasisMismatch("from_sparse: square matrix required");
    auto Mp = std::make_shared<SpMat>(M);
    std::size_t n = static_cast<std::size_t>(M.rows());
    return {n, [Mp, constant](const VecC& x, VecC& y) {
                y.noalias() = (*Mp) * x;
                if (constant != 0.0) y += constant * x;
            }};
}

namespace {

SpectralResult dense_solve(const SpMat& M, int k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(M)};
    int kk = std::min<int>(k, static_cast<int>(M.rows()));
    SpectralResult r;
    r.values = es.eigenvalues().head(kk);
    r.vectors = es.eigenvectors().leftCols(kk);
    r.dense = true;
    return r;
}

// Orthogonalize a block against V and within itself (repeated modified
// Gram-Schmidt); drops columns that collapse. Returns the surviving columns.
Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& V, Eigen::MatrixXcd W) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
        VecC w = W.col(c);
        double before = w.norm();
        if (before == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            if (V.cols() > 0) w -= V * (V.adjoint() * w).eval();
            for (Eigen::Index j : keep) w -= W.col(j) * (W.col(j).dot(w));
        }
        double after = w.norm();
        if (after < 1e-8 * before) continue;
        W.col(c) = w / after;
        keep.push_back(c);
    }
    Eigen::MatrixXcd out(W.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = W.col(keep[i]);
    return out;
}

SpectralResult iterative_solve(const HermOp& A, const SpectraOptions& opts) {
    const Eigen::Index n = static_cast<Eigen::Index>(A.dim);
    const int k = std::min<int>(opts.k, static_cast<int>(n));
    int b = opts.block > 0 ? opts.block : k + 4;
    b = std::min<int>(b, static_cast<int>(n));
    int cap = std::max(opts.subspace_cap, 3 * b);
    cap = std::min<int>(cap, static_cast<int>(n));

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd X(n, b);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < b; ++j) X(i, j) = cplx(gauss(rng), gauss(rng));

    Eigen::MatrixXcd V(n, 0), AV(n, 0);
    int applies = 0;
    auto append = [&](const Eigen::MatrixXcd& block) {
        Eigen::MatrixXcd W = orthonormalize(V, block);
        if (W.cols() == 0) return;
        Eigen::Index m = V.cols();
        V.conservativeResize(Eigen::NoChange, m + W.cols());
        AV.conservativeResize(Eigen::NoChange, m + W.cols());
        for (Eigen::Index c = 0; c < W.cols(); ++c) {
            V.col(m + c) = W.col(c);
            VecC y(n);
            A.apply(W.col(c), y);
            AV.col(m + c) = y;
            ++applies;
        }
    };
    append(X);

    for (int restart = 0; restart < opts.max_restarts; ++restart) {
        Eigen::MatrixXcd H = V.adjoint() * AV;
        H = 0.5 * (H + H.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
        const Eigen::Index m = V.cols();
        const int kk = std::min<int>(k, static_cast<int>(m));

        Eigen::MatrixXcd Y = es.eigenvectors().leftCols(kk);
        Eigen::MatrixXcd ritz = V * Y;
        Eigen::MatrixXcd Aritz = AV * Y;
        Eigen::MatrixXcd R(n, kk);
        bool converged = (m >= static_cast<Eigen::Index>(k));
        for (int i = 0; i < kk; ++i) {
            double theta = es.eigenvalues()(i);
            R.col(i) = Aritz.col(i) - theta * ritz.col(i);
            if (R.col(i).norm() > opts.tol * (1.0 + std::abs(theta))) converged = false;
        }
        if (converged || m == n) {
            SpectralResult r;
            r.values = es.eigenvalues().head(kk);
            r.vectors = std::move(ritz);
            r.dense = false;
            r.iterations = applies;
            if (!converged)
                throw NoConvergence("lowest_eigenpairs: subspace exhausted before convergence");
            return r;
        }
        if (m + kk > cap) {
            int keep = std::min<int>(2 * b, static_cast<int>(m));
            Eigen::MatrixXcd Yk = es.eigenvectors().leftCols(keep);
            V = (V * Yk).eval();
            AV = (AV * Yk).eval();
        }
        append(R);
        if (V.cols() == m) {
            // residuals vanished inside the current span; stir with noise
            Eigen::MatrixXcd noise(n, 1);
            for (Eigen::Index i = 0; i < n; ++i) noise(i, 0) = cplx(gauss(rng), gauss(rng));
            append(noise);
            if (V.cols() == m) break;
        }
    }
    throw NoConvergence("lowest_eigenpairs: restart limit reached");
}

}  // namespace

SpectralResult lowest_eigenpairs(const SpMat& M, const SpectraOptions& opts) {
    if (static_cast<std::size_t>(M.rows()) <= opts.dense_threshold) return dense_solve(M, opts.k);
    return iterative_solve(HermOp::from_sparse(M), opts);
}

SpectralResult lowest_eigenpairs(const HermOp& A, const SpectraOptions& opts) {
    return iterative_solve(A, opts);
}

Eigen::VectorXd dense_spectrum(const SpMat& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(M),
                                                       Eigen::EigenvaluesOnly};
    return es.eigenvalues();
}

DegeneracyResult ground_state_degeneracy(const Eigen::VectorXd& values, double gap_threshold,
                                         double resolution) {
    if (values.size() < 2)
        throw NoConvergence("ground_state_degeneracy: need at least two eigenvalues");
    DegeneracyResult r;
    r.e0 = values(0);
    r.gap = values(1) - values(0);
    r.gap_threshold = gap_threshold * (1.0 + std::abs(r.e0));
    r.resolution = resolution * (1.0 + std::abs(r.e0));
    if (r.gap > r.gap_threshold)
        r.verdict = Degeneracy::unique;
    else if (r.gap < r.resolution)
        r.verdict = Degeneracy::degenerate;
    else
        r.verdict = Degeneracy::undecided;
    return r;
}

VecC expv(const HermOp& A, double beta, const VecC& v, int krylov_dim, double tol) {
    const Eigen::Index n = static_cast<Eigen::Index>(A.dim);
    double beta0 = v.norm();
    if (beta0 == 0.0) return v;
    int m_cap = std::min<int>(krylov_dim, static_cast<int>(n));

    Eigen::MatrixXcd V(n, m_cap);
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(m_cap, m_cap);
    V.col(0) = v / beta0;
    int m = 1;
    for (; m <= m_cap; ++m) {
        VecC w(n);
        A.apply(V.col(m - 1), w);
        T(m - 1, m - 1) = std::real(V.col(m - 1).dot(w));
        w -= T(m - 1, m - 1) * V.col(m - 1);
        if (m >= 2) w -= T(m - 1, m - 2) * V.col(m - 2);
        // full re-orthogonalization, twice; drift here ruins the exponential
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < m; ++j) w -= V.col(j).dot(w) * V.col(j);
        double h_next = w.norm();
        bool breakdown = h_next < 1e-14 * beta0;
        // error estimate: weight of the would-be next basis vector
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T.block(0, 0, m, m));
        Eigen::VectorXcd y =
            es.eigenvectors() * ((-beta * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                                 es.eigenvectors().row(0).adjoint().eval());
        double est = h_next * std::abs(y(m - 1)) * std::abs(beta);
        if (breakdown || est <= tol || m == m_cap) return beta0 * (V.leftCols(m) * y);
        T(m, m - 1) = h_next;
        T(m - 1, m) = h_next;
        V.col(m) = w / h_next;
    }
    throw NoConvergence("expv: unreachable");
}

VecC expv(const SpMat& M, double beta, const VecC& v, int krylov_dim, double tol) {
    return expv(HermOp::from_sparse(M), beta, v, krylov_dim, tol);
}

std::vector<SweepRow> truncation_sweep(const ValidatedModel& model,
                                       const std::vector<int>& n_max_list,
                                       const SpectraOptions& opts) {
    ElectronBasis basis = enumerate_basis(model, Projection::P0);
    SpMat S2e = s2_total(basis);
    std::vector<SweepRow> rows;
    for (int n_max : n_max_list) {
        BosonParams bp;
        bp.rep = BosonRep::number;
        bp.n_max = n_max;
        BosonSpace bosons = build_boson_space(model.spec.n_lambda(), bp);
        SpMat H = build_hamiltonian(model, basis, bosons).total();
        SpectraOptions o = opts;
        o.k = std::max(opts.k, 2);
        SpectralResult res = lowest_eigenpairs(H, o);
        VecC v0 = res.vectors.col(0);
        SpMat S2 = tensor(S2e, bosons.identity());
        VecC sv = S2 * v0;
        double s2 = std::real(v0.dot(sv));
        double s = 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(0.0, s2)));
        rows.push_back({n_max, res.values(0), res.values(1) - res.values(0), s2, s});
    }
    return rows;
}

}  // namespace klm
