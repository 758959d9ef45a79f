#include "klm/cones.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace klm {

namespace {

std::vector<std::uint32_t> half_filling_masks(int n_sites) {
    std::vector<std::uint32_t> masks;
    for (std::uint32_t m = 0; m < (1u << n_sites); ++m)
        if (std::popcount(m) == n_sites / 2) masks.push_back(m);
    return masks;
}

VecC gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    VecC v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(gauss(rng), gauss(rng));
    return v;
}

}  // namespace

Eigen::MatrixXcd HSIdentification::reshape(const VecC& psi) const {
    if (psi.size() != static_cast<Eigen::Index>(none.dim()))
        throw BasisMismatch("reshape: vector does not match the half-filled basis");
    Eigen::MatrixXcd Psi = Eigen::MatrixXcd::Zero(nF, nF);
    for (std::size_t i = 0; i < none.dim(); ++i) {
        const ElectronConfig& c = none.configs[i];
        Psi(mask_index.at(c.up), mask_index.at(c.down)) = psi(static_cast<Eigen::Index>(i));
    }
    return Psi;
}

VecC HSIdentification::unreshape(const Eigen::MatrixXcd& Psi) const {
    if (Psi.rows() != nF || Psi.cols() != nF)
        throw BasisMismatch("unreshape: matrix does not match the mask count");
    VecC psi(static_cast<Eigen::Index>(none.dim()));
    for (std::size_t i = 0; i < none.dim(); ++i) {
        const ElectronConfig& c = none.configs[i];
        psi(static_cast<Eigen::Index>(i)) = Psi(mask_index.at(c.up), mask_index.at(c.down));
    }
    return psi;
}

VecC HSIdentification::rank_one(const VecC& x) const {
    if (x.size() != nF) throw BasisMismatch("rank_one: mask-indexed vector required");
    return unreshape(x * x.adjoint());
}

HSIdentification build_identification(int n_lambda, int n_omega) {
    HSIdentification id;
    id.n_sites = n_lambda + n_omega;
    id.masks = half_filling_masks(id.n_sites);
    id.nF = static_cast<int>(id.masks.size());
    for (int i = 0; i < id.nF; ++i) id.mask_index[id.masks[i]] = i;
    id.none = enumerate_basis(n_lambda, n_omega, Projection::none);
    return id;
}

std::size_t ConeSpace::dim() const {
    std::size_t e = (kind == ConeKind::grid_nonneg) ? 1 : basis.dim();
    std::size_t b = bosons ? bosons->dim() : 1;
    if (kind == ConeKind::psd_reshape || kind == ConeKind::sector_psd_reshape) b = 1;
    return e * b;
}

namespace {

// Omega-occupation blocks of the mask list: masks agreeing on the f-site bits
// can appear together in one sector-cone generator.
std::vector<std::vector<int>> sector_blocks(const HSIdentification& id, int n_lambda) {
    std::map<std::uint32_t, std::vector<int>> by_omega;
    for (int i = 0; i < id.nF; ++i) by_omega[id.masks[i] >> n_lambda].push_back(i);
    std::vector<std::vector<int>> blocks;
    for (auto& [key, v] : by_omega) blocks.push_back(std::move(v));
    return blocks;
}

// Vector on `basis` for the rank-one matrix x x^dag.
VecC rank_one_on_basis(const HSIdentification& id, const ElectronBasis& basis, const VecC& x) {
    VecC v(static_cast<Eigen::Index>(basis.dim()));
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        const ElectronConfig& c = basis.configs[i];
        v(static_cast<Eigen::Index>(i)) =
            x(id.mask_index.at(c.up)) * std::conj(x(id.mask_index.at(c.down)));
    }
    return v;
}

VecC electron_sample(const ConeSpace& cone, std::mt19937_64& rng) {
    const HSIdentification& id = cone.ident;
    VecC x = VecC::Zero(id.nF);
    if (cone.kind == ConeKind::psd_reshape) {
        x = gaussian_vector(id.nF, rng);
    } else {
        auto blocks = sector_blocks(id, cone.basis.order.n_lambda);
        std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
        const auto& block = blocks[pick(rng)];
        VecC y = gaussian_vector(static_cast<Eigen::Index>(block.size()), rng);
        for (std::size_t j = 0; j < block.size(); ++j) x(block[j]) = y(static_cast<Eigen::Index>(j));
    }
    return rank_one_on_basis(id, cone.basis, x);
}

VecC grid_sample(const BosonSpace& bosons, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    VecC f(static_cast<Eigen::Index>(bosons.dim()));
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = std::abs(gauss(rng));
    return f;
}

VecC kron_vec(const VecC& a, const VecC& b) {
    VecC v(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) v.segment(i * b.size(), b.size()) = a(i) * b;
    return v;
}

}  // namespace

VecC ConeSpace::sample(std::mt19937_64& rng) const {
    VecC v;
    switch (kind) {
        case ConeKind::psd_reshape:
        case ConeKind::sector_psd_reshape:
            v = electron_sample(*this, rng);
            break;
        case ConeKind::grid_nonneg:
            v = grid_sample(*bosons, rng);
            break;
        case ConeKind::product_psd_grid:
            v = kron_vec(electron_sample(*this, rng), grid_sample(*bosons, rng));
            break;
    }
    double n = v.norm();
    if (n == 0.0) return sample(rng);
    return v / n;
}

std::vector<VecC> ConeSpace::coordinate_rays(int max_count) const {
    std::vector<VecC> rays;
    auto push = [&](VecC v) {
        double n = v.norm();
        if (n > 0 && static_cast<int>(rays.size()) < max_count) rays.push_back(v / n);
    };
    if (kind == ConeKind::grid_nonneg) {
        for (std::size_t k = 0; k < bosons->dim() && static_cast<int>(rays.size()) < max_count; ++k) {
            VecC e = VecC::Zero(static_cast<Eigen::Index>(bosons->dim()));
            e(static_cast<Eigen::Index>(k)) = 1.0;
            push(e);
        }
        return rays;
    }
    // diagonal matrix units, then same-block two-mask combinations
    std::vector<std::vector<int>> blocks;
    if (kind == ConeKind::psd_reshape) {
        std::vector<int> all(ident.nF);
        for (int i = 0; i < ident.nF; ++i) all[i] = i;
        blocks.push_back(all);
    } else {
        blocks = sector_blocks(ident, basis.order.n_lambda);
    }
    std::vector<VecC> electron_rays;
    for (const auto& block : blocks)
        for (int a : block) {
            VecC x = VecC::Zero(ident.nF);
            x(a) = 1.0;
            electron_rays.push_back(rank_one_on_basis(ident, basis, x));
        }
    for (const auto& block : blocks)
        for (std::size_t p = 0; p < block.size(); ++p)
            for (std::size_t q = p + 1; q < block.size(); ++q) {
                VecC x = VecC::Zero(ident.nF);
                x(block[p]) = 1.0;
                x(block[q]) = 1.0;
                electron_rays.push_back(rank_one_on_basis(ident, basis, x));
                x(block[q]) = cplx(0.0, 1.0);
                electron_rays.push_back(rank_one_on_basis(ident, basis, x));
            }
    if (kind == ConeKind::product_psd_grid) {
        for (std::size_t k = 0; k < bosons->dim(); ++k) {
            VecC e = VecC::Zero(static_cast<Eigen::Index>(bosons->dim()));
            e(static_cast<Eigen::Index>(k)) = 1.0;
            for (const auto& er : electron_rays) {
                if (static_cast<int>(rays.size()) >= max_count) return rays;
                push(kron_vec(er, e));
            }
        }
        return rays;
    }
    for (const auto& er : electron_rays) push(er);
    return rays;
}

namespace {

bool psd_contains(const ConeSpace& cone, const VecC& v, double tol) {
    Eigen::MatrixXcd Psi;
    if (cone.kind == ConeKind::psd_reshape) {
        Psi = cone.ident.reshape(v);
    } else {
        VecC full = VecC::Zero(static_cast<Eigen::Index>(cone.ident.none.dim()));
        for (std::size_t i = 0; i < cone.basis.dim(); ++i) {
            auto j = cone.ident.none.find(cone.basis.configs[i]);
            full(static_cast<Eigen::Index>(*j)) = v(static_cast<Eigen::Index>(i));
        }
        Psi = cone.ident.reshape(full);
    }
    double scale = 1.0 + Psi.cwiseAbs().maxCoeff();
    if ((Psi - Psi.adjoint()).cwiseAbs().maxCoeff() > tol * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (Psi + Psi.adjoint()),
                                                       Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol * scale;
}

bool grid_contains(const VecC& v, double tol) {
    double scale = 1.0 + v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v(i).imag()) > tol * scale) return false;
        if (v(i).real() < -tol * scale) return false;
    }
    return true;
}

}  // namespace

bool ConeSpace::contains(const VecC& v, double tol) const {
    if (v.size() != static_cast<Eigen::Index>(dim()))
        throw BasisMismatch("contains: dimension mismatch");
    switch (kind) {
        case ConeKind::psd_reshape:
        case ConeKind::sector_psd_reshape:
            return psd_contains(*this, v, tol);
        case ConeKind::grid_nonneg:
            return grid_contains(v, tol);
        case ConeKind::product_psd_grid: {
            const Eigen::Index ne = static_cast<Eigen::Index>(basis.dim());
            const Eigen::Index nb = static_cast<Eigen::Index>(bosons->dim());
            Eigen::MatrixXcd M(ne, nb);
            for (Eigen::Index e = 0; e < ne; ++e) M.row(e) = v.segment(e * nb, nb).transpose();
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
            double s0 = svd.singularValues()(0);
            if (s0 == 0.0) return true;
            if (svd.singularValues().size() > 1 && svd.singularValues()(1) > tol * s0)
                throw UnsupportedExactTest(
                    "contains: product-cone membership is only decided for rank-one vectors");
            VecC psi = svd.matrixU().col(0);
            VecC f = svd.matrixV().col(0).conjugate() * s0;
            // pull the phase freedom into the grid factor
            Eigen::Index imax = 0;
            f.cwiseAbs().maxCoeff(&imax);
            cplx ph = f(imax) / std::abs(f(imax));
            f /= ph;
            psi *= ph;
            if (!grid_contains(f, tol)) return false;
            // reshape of psi must be PSD up to a phase; fix it on the diagonal
            ConeSpace electron{ConeKind::sector_psd_reshape, ident, basis, nullptr};
            Eigen::MatrixXcd Psi = electron.ident.reshape([&] {
                VecC full = VecC::Zero(static_cast<Eigen::Index>(ident.none.dim()));
                for (std::size_t i = 0; i < basis.dim(); ++i)
                    full(static_cast<Eigen::Index>(*ident.none.find(basis.configs[i]))) =
                        psi(static_cast<Eigen::Index>(i));
                return full;
            }());
            Eigen::Index dmax = 0;
            Psi.diagonal().cwiseAbs().maxCoeff(&dmax);
            cplx d = Psi(dmax, dmax);
            if (std::abs(d) > 0) psi *= std::conj(d / std::abs(d));
            return psd_contains(electron, psi, tol);
        }
    }
    throw UnsupportedExactTest("contains: unknown cone kind");
}

ConeSpace make_cone(ConeKind kind, const ValidatedModel& model, const BosonSpace* bosons) {
    ConeSpace cone;
    cone.kind = kind;
    cone.ident = build_identification(model.spec.n_lambda(), model.spec.n_omega());
    if (kind == ConeKind::psd_reshape)
        cone.basis = cone.ident.none;
    else
        cone.basis = enumerate_basis(model, Projection::Q0);
    if (kind == ConeKind::grid_nonneg || kind == ConeKind::product_psd_grid) {
        if (!bosons) throw BasisMismatch("make_cone: boson space required for this cone");
        cone.bosons = bosons;
    }
    return cone;
}

nlohmann::json to_json(const ConeCheckReport& r) {
    return {{"check", r.check},         {"cone", r.cone}, {"seed", r.seed},
            {"n_samples", r.n_samples}, {"min_statistic", r.min_statistic},
            {"tol", r.tol},             {"pass", r.pass}};
}

namespace {

const char* cone_name(ConeKind k) {
    switch (k) {
        case ConeKind::psd_reshape: return "psd-reshape";
        case ConeKind::sector_psd_reshape: return "sector-psd-reshape";
        case ConeKind::grid_nonneg: return "grid-nonneg";
        case ConeKind::product_psd_grid: return "product-psd-grid";
    }
    return "?";
}

}  // namespace

Apply heat_kernel(const SpMat& H, double beta, double constant, int krylov_dim) {
    if (H.rows() <= 2000) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es{Eigen::MatrixXcd(H)};
        auto V = std::make_shared<Eigen::MatrixXcd>(es.eigenvectors());
        auto w = std::make_shared<Eigen::VectorXd>(
            (-beta * (es.eigenvalues().array() + constant)).exp().matrix());
        return [V, w](const VecC& v) -> VecC {
            return (*V) * (w->asDiagonal() * (V->adjoint() * v).eval());
        };
    }
    auto A = HermOp::from_sparse(H, constant);
    return [A, beta, krylov_dim](const VecC& v) -> VecC { return expv(A, beta, v, krylov_dim); };
}

Apply matrix_apply(const SpMat& M) {
    auto Mp = std::make_shared<SpMat>(M);
    return [Mp](const VecC& v) -> VecC { return (*Mp) * v; };
}

namespace {

ConeCheckReport pairing_scan(const std::string& name, const Apply& op, const ConeSpace& cone,
                             const ConeCheckOptions& opts, bool strict) {
    std::mt19937_64 rng(opts.seed);
    double mn = std::numeric_limits<double>::infinity();
    int pairs = 0;
    // the operator application dominates the cost, so pair each image
    // against a whole batch of test generators instead of one partner
    if (!strict && opts.include_coordinate_rays) {
        auto rays = cone.coordinate_rays(24);
        for (std::size_t a = 0; a < rays.size(); ++a) {
            VecC Ar = op(rays[a]);
            for (std::size_t b = a; b < rays.size(); ++b) {
                mn = std::min(mn, std::real(rays[b].dot(Ar)));
                ++pairs;
            }
        }
    }
    const int side = static_cast<int>(std::ceil(std::sqrt(double(opts.n_samples))));
    std::vector<VecC> probes(side);
    for (int s = 0; s < side; ++s) probes[s] = cone.sample(rng);
    for (int s = 0; s < side; ++s) {
        VecC Au = op(cone.sample(rng));
        for (const VecC& w : probes) {
            mn = std::min(mn, std::real(w.dot(Au)));
            ++pairs;
        }
    }
    ConeCheckReport r;
    r.check = name;
    r.cone = cone_name(cone.kind);
    r.seed = opts.seed;
    r.n_samples = pairs;
    r.min_statistic = mn;
    r.tol = strict ? opts.tol_strict : opts.tol;
    r.pass = strict ? (mn > opts.tol_strict) : (mn >= -opts.tol);
    return r;
}

}  // namespace

ConeCheckReport check_pairing_nonneg(const std::string& name, const Apply& op,
                                     const ConeSpace& cone, const ConeCheckOptions& opts) {
    return pairing_scan(name, op, cone, opts, false);
}

ConeCheckReport check_pairing_positive(const std::string& name, const Apply& op,
                                       const ConeSpace& cone, const ConeCheckOptions& opts) {
    return pairing_scan(name, op, cone, opts, true);
}

ConeCheckReport check_ground_state_positivity(const std::string& name, const SpMat& H,
                                              const ConeSpace& cone,
                                              const ConeCheckOptions& opts) {
    SpectraOptions so;
    so.k = 2;
    so.seed = opts.seed;
    SpectralResult res = lowest_eigenpairs(H, so);
    DegeneracyResult deg = ground_state_degeneracy(res.values);
    if (deg.verdict != Degeneracy::unique)
        throw DegenerateGroundState("ground state not resolved as unique");

    std::mt19937_64 rng(opts.seed);
    VecC v0 = res.vectors.col(0);
    v0.normalize();
    VecC u0 = cone.sample(rng);
    cplx z = u0.dot(v0);
    if (std::abs(z) > 0) v0 *= std::conj(z) / std::abs(z);
    double mn = std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.n_samples; ++s) {
        VecC u = cone.sample(rng);
        mn = std::min(mn, std::real(u.dot(v0)));
    }
    ConeCheckReport r;
    r.check = name;
    r.cone = cone_name(cone.kind);
    r.seed = opts.seed;
    r.n_samples = opts.n_samples;
    r.min_statistic = mn;
    r.tol = opts.tol_strict;
    r.pass = mn > opts.tol_strict;
    return r;
}

}  // namespace klm
