#include "klm/fock.hpp"

#include <bit>
#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

namespace klm {

namespace {

bool site_occupied(const ElectronConfig& c, int site, Spin s) {
    std::uint32_t mask = s == Spin::up ? c.up : c.down;
    return (mask >> site) & 1u;
}

// Enumerate all masks over n bits with the given popcount, ascending.
std::vector<std::uint32_t> masks_with_popcount(int n, int k) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m < (1u << n); ++m)
        if (std::popcount(m) == k) out.push_back(m);
    return out;
}

bool projection_ok(Projection p, std::uint32_t up, std::uint32_t down, int n_lambda, int n_sites) {
    if (p == Projection::none) return true;
    std::uint32_t omega_mask = ((1u << n_sites) - 1u) & ~((1u << n_lambda) - 1u);
    std::uint32_t u = up & omega_mask, d = down & omega_mask;
    if (p == Projection::P0) return (u ^ d) == omega_mask;  // each f site singly occupied
    return u == d;                                          // Q0: doubly occupied or empty
}

}  // namespace

ElectronBasis enumerate_basis(int n_lambda, int n_omega, Projection projection) {
    const int n_sites = n_lambda + n_omega;
    if (2 * n_sites > 64) throw InvalidTruncation("at most 64 fermionic modes supported");
    if (n_sites % 2 != 0) throw SectorEmpty("half filling with S3=0 needs an even site count");
    ElectronBasis b;
    b.order = {n_lambda, n_sites};
    b.projection = projection;
    b.n_up = n_sites / 2;
    auto masks = masks_with_popcount(n_sites, b.n_up);
    for (std::uint32_t up : masks)
        for (std::uint32_t down : masks)
            if (projection_ok(projection, up, down, n_lambda, n_sites))
                b.configs.push_back({up, down});
    if (b.configs.empty()) throw SectorEmpty("empty electron sector");
    for (std::size_t i = 0; i < b.configs.size(); ++i) b.index[b.configs[i].key()] = i;
    return b;
}

ElectronBasis enumerate_basis(const ValidatedModel& model, Projection projection) {
    return enumerate_basis(model.spec.n_lambda(), model.spec.n_omega(), projection);
}

ElectronBasis enumerate_fixed_number_basis(int n_lambda, int n_omega, int n_electrons) {
    const int n_sites = n_lambda + n_omega;
    if (2 * n_sites > 64) throw InvalidTruncation("at most 64 fermionic modes supported");
    ElectronBasis b;
    b.order = {n_lambda, n_sites};
    b.projection = Projection::none;
    b.n_up = -1;
    for (int k_up = 0; k_up <= std::min(n_electrons, n_sites); ++k_up) {
        int k_down = n_electrons - k_up;
        if (k_down < 0 || k_down > n_sites) continue;
        for (std::uint32_t up : masks_with_popcount(n_sites, k_up))
            for (std::uint32_t down : masks_with_popcount(n_sites, k_down))
                b.configs.push_back({up, down});
    }
    if (b.configs.empty()) throw SectorEmpty("empty electron sector");
    for (std::size_t i = 0; i < b.configs.size(); ++i) b.index[b.configs[i].key()] = i;
    return b;
}

std::optional<std::pair<ElectronConfig, int>> apply_fermion(bool create, int site, Spin spin,
                                                            const ModeOrder& order,
                                                            ElectronConfig config) {
    bool occ = site_occupied(config, site, spin);
    if (create == occ) return std::nullopt;
    // Parity: occupied modes strictly before the target in mode order.
    std::uint32_t low = (1u << site) - 1u;
    int before;
    if (spin == Spin::up) {
        before = std::popcount(config.up & low);
    } else {
        before = std::popcount(config.up) + std::popcount(config.down & low);
    }
    ElectronConfig out = config;
    std::uint32_t& mask = spin == Spin::up ? out.up : out.down;
    mask ^= (1u << site);
    return std::make_pair(out, before % 2 == 0 ? 1 : -1);
}

std::optional<std::pair<ElectronConfig, int>> apply_string(std::span<const FermionOp> ops,
                                                           const ModeOrder& order,
                                                           ElectronConfig config) {
    int sign = 1;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) {
        auto r = apply_fermion(it->create, it->site, it->spin, order, config);
        if (!r) return std::nullopt;
        config = r->first;
        sign *= r->second;
    }
    return std::make_pair(config, sign);
}

SpMat operator_matrix(const ElectronBasis& basis, const std::vector<OperatorTerm>& terms) {
    std::vector<Eigen::Triplet<cplx>> trips;
    for (std::size_t j = 0; j < basis.dim(); ++j) {
        for (const OperatorTerm& term : terms) {
            if (term.coeff == cplx(0)) continue;
            auto r = apply_string(term.ops, basis.order, basis.configs[j]);
            if (!r) continue;
            auto i = basis.find(r->first);
            if (!i) throw BasisMismatch("operator string leaves the basis sector");
            trips.emplace_back(static_cast<int>(*i), static_cast<int>(j),
                               term.coeff * double(r->second));
        }
    }
    SpMat M(static_cast<int>(basis.dim()), static_cast<int>(basis.dim()));
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

std::size_t BosonSpace::dim() const {
    std::size_t n = 1;
    for (int m = 0; m < modes; ++m) n *= d;
    return n;
}

SpMat BosonSpace::mode_op(int mode, const Eigen::MatrixXcd& op) const {
    SpMat result = op.sparseView();
    // Identities on the slower modes, then on the faster ones.
    std::size_t left = 1, right = 1;
    for (int m = 0; m < mode; ++m) left *= d;
    for (int m = mode + 1; m < modes; ++m) right *= d;
    if (left > 1) {
        SpMat il(static_cast<int>(left), static_cast<int>(left));
        il.setIdentity();
        result = tensor(il, result);
    }
    if (right > 1) {
        SpMat ir(static_cast<int>(right), static_cast<int>(right));
        ir.setIdentity();
        result = tensor(result, ir);
    }
    return result;
}

SpMat BosonSpace::identity() const {
    SpMat id(static_cast<int>(dim()), static_cast<int>(dim()));
    id.setIdentity();
    return id;
}

SpMat BosonSpace::n_p() const {
    SpMat total(static_cast<int>(dim()), static_cast<int>(dim()));
    for (int m = 0; m < modes; ++m) total += mode_op(m, np1);
    return total;
}

SpMat BosonSpace::diagonal_op(const std::vector<Eigen::VectorXcd>& per_mode_diag) const {
    const std::size_t n = dim();
    Eigen::VectorXcd diag = Eigen::VectorXcd::Ones(static_cast<int>(n));
    for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t rest = idx;
        cplx v = 1.0;
        for (int m = modes - 1; m >= 0; --m) {
            int occ = static_cast<int>(rest % d);
            rest /= d;
            v *= per_mode_diag[m](occ);
        }
        diag(static_cast<int>(idx)) = v;
    }
    SpMat M(static_cast<int>(n), static_cast<int>(n));
    for (int i = 0; i < static_cast<int>(n); ++i) M.insert(i, i) = diag(i);
    M.makeCompressed();
    return M;
}

int BosonSpace::total_occupation(std::size_t idx) const {
    int total = 0;
    for (int m = 0; m < modes; ++m) {
        total += static_cast<int>(idx % d);
        idx /= d;
    }
    return total;
}

BosonSpace build_boson_space(int modes, const BosonParams& params) {
    BosonSpace s;
    s.rep = params.rep;
    s.params = params;
    s.modes = modes;
    if (params.rep == BosonRep::number) {
        if (params.n_max < 1) throw InvalidTruncation("number basis needs n_max >= 1");
        const int d = params.n_max + 1;
        s.d = d;
        s.b1 = Eigen::MatrixXcd::Zero(d, d);
        for (int n = 0; n + 1 < d; ++n) s.b1(n, n + 1) = std::sqrt(double(n + 1));
        Eigen::MatrixXcd bd = s.b1.adjoint();
        s.q1 = (s.b1 + bd) / std::sqrt(2.0);
        s.p1 = cplx(0, 1) * (bd - s.b1) / std::sqrt(2.0);
        s.np1 = Eigen::MatrixXcd::Zero(d, d);
        for (int n = 0; n < d; ++n) s.np1(n, n) = double(n);
    } else {
        if (params.n_points < 3) throw InvalidTruncation("grid needs at least 3 points");
        if (!(params.extent > 0)) throw InvalidTruncation("grid extent must be positive");
        const int n = params.n_points;
        s.d = n;
        s.grid_q = Eigen::VectorXd::LinSpaced(n, -params.extent, params.extent);
        const double dq = s.grid_q(1) - s.grid_q(0);
        s.q1 = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) s.q1(i, i) = s.grid_q(i);
        // Central differences with Dirichlet boundaries.
        Eigen::MatrixXcd lap = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            lap(i, i) = -2.0 / (dq * dq);
            if (i > 0) lap(i, i - 1) = 1.0 / (dq * dq);
            if (i + 1 < n) lap(i, i + 1) = 1.0 / (dq * dq);
        }
        s.p1 = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            if (i > 0) s.p1(i, i - 1) = cplx(0, 1) / (2 * dq);
            if (i + 1 < n) s.p1(i, i + 1) = cplx(0, -1) / (2 * dq);
        }
        s.np1 = 0.5 * (-lap + s.q1 * s.q1 - Eigen::MatrixXcd::Identity(n, n));
        s.b1 = (s.q1 + cplx(0, 1) * s.p1) / std::sqrt(2.0);
    }
    return s;
}

SpMat tensor(const SpMat& A, const SpMat& B) {
    SpMat out = Eigen::kroneckerProduct(A, B).eval();
    out.makeCompressed();
    return out;
}

}  // namespace klm
