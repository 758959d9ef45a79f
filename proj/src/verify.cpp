#include "klm/verify.hpp"

#include <sstream>

namespace klm {

const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::undecided: return "undecided";
        case CheckStatus::skipped: return "skipped";
    }
    return "?";
}

nlohmann::json to_json(const CheckRecord& r) {
    return {{"name", r.name}, {"claim", r.claim},   {"status", to_string(r.status)},
            {"stats", r.stats}, {"tol", r.tol},     {"seed", r.seed},
            {"note", r.note}};
}

bool VerificationReport::all_passed() const {
    for (const auto& r : records)
        if (r.status == CheckStatus::fail) return false;
    return true;
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records) recs.push_back(klm::to_json(r));
    return {{"schema_version", 1},
            {"model_digest", model_digest},
            {"seed", seed},
            {"all_passed", all_passed()},
            {"records", recs}};
}

std::string VerificationReport::to_csv() const {
    std::ostringstream os;
    os << "name,claim,status,tol,seed,note\n";
    for (const auto& r : records) {
        std::string note = r.note;
        for (auto& c : note)
            if (c == ',' || c == '\n') c = ';';
        os << r.name << ',' << r.claim << ',' << to_string(r.status) << ',' << r.tol << ','
           << r.seed << ',' << note << '\n';
    }
    return os.str();
}

std::string model_digest(const ValidatedModel& model) {
    std::string s = model_to_json(model.spec).dump();
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

BosonSpace number_bosons(const ValidatedModel& model, int n_max) {
    BosonParams bp;
    bp.rep = BosonRep::number;
    bp.n_max = n_max;
    return build_boson_space(model.spec.n_lambda(), bp);
}

bool effective_coulomb_psd(const ValidatedModel& model) {
    return is_positive_semidefinite(effective_coulomb(model));
}

}  // namespace

CheckRecord check_uniqueness(const ValidatedModel& model, const VerifyOptions& opts) {
    CheckRecord rec;
    rec.name = "ground-state-uniqueness";
    rec.claim = "unique ground state in the half-filled S3=0 sector";
    rec.seed = opts.spectra.seed;
    rec.tol = 1e-7;
    if (!effective_coulomb_psd(model)) {
        rec.status = CheckStatus::skipped;
        rec.note = "effective Coulomb matrix is not positive semidefinite";
        return rec;
    }
    auto rows = truncation_sweep(model, opts.n_max_list, opts.spectra);
    nlohmann::json stats = nlohmann::json::array();
    bool all_unique = true;
    bool any_undecided = false;
    for (const auto& r : rows) {
        Eigen::VectorXd v(2);
        v << r.e0, r.e0 + r.gap;
        DegeneracyResult d = ground_state_degeneracy(v);
        stats.push_back({{"n_max", r.n_max},
                         {"e0", r.e0},
                         {"gap", r.gap},
                         {"verdict", d.verdict == Degeneracy::unique
                                         ? "unique"
                                         : (d.verdict == Degeneracy::degenerate ? "degenerate"
                                                                                : "undecided")}});
        if (d.verdict == Degeneracy::undecided) any_undecided = true;
        if (d.verdict != Degeneracy::unique) all_unique = false;
    }
    double stability = 0.0;
    if (rows.size() >= 2) {
        double a = rows[rows.size() - 2].gap, b = rows.back().gap;
        stability = std::abs(a - b) / std::max(1e-300, std::abs(b));
    }
    rec.stats = {{"levels", stats}, {"gap_stability", stability}};
    if (all_unique && stability <= 0.10)
        rec.status = CheckStatus::pass;
    else if (any_undecided || stability > 0.10)
        rec.status = CheckStatus::undecided;
    else
        rec.status = CheckStatus::fail;
    return rec;
}

CheckRecord check_total_spin(const ValidatedModel& model, const VerifyOptions& opts) {
    CheckRecord rec;
    rec.name = "total-spin-formula";
    rec.claim = "ground-state total spin matches the sublattice count";
    rec.seed = opts.spectra.seed;
    rec.tol = 1e-6;
    if (model.coupling_class == CouplingClass::mixed) {
        rec.status = CheckStatus::skipped;
        rec.note = "mixed coupling signs: no closed-form spin prediction";
        return rec;
    }
    if (!effective_coulomb_psd(model)) {
        rec.status = CheckStatus::skipped;
        rec.note = "effective Coulomb matrix is not positive semidefinite";
        return rec;
    }
    double s_pred = predicted_total_spin(model);
    double target = s_pred * (s_pred + 1.0);
    auto rows = truncation_sweep(model, {opts.n_max_list.back()}, opts.spectra);
    double s2 = rows[0].s2;
    rec.stats = {{"n_max", rows[0].n_max}, {"s2", s2},      {"s", rows[0].s},
                 {"predicted_s", s_pred},  {"target", target}};
    rec.status = std::abs(s2 - target) <= rec.tol ? CheckStatus::pass : CheckStatus::fail;
    return rec;
}

CheckRecord check_correlation_signs(const ValidatedModel& model, const VerifyOptions& opts) {
    CheckRecord rec;
    rec.name = "correlation-sign-structure";
    rec.claim = "transverse spin correlators carry the sublattice sign pattern";
    rec.seed = opts.spectra.seed;
    rec.tol = 1e-10;
    if (!effective_coulomb_psd(model)) {
        rec.status = CheckStatus::skipped;
        rec.note = "effective Coulomb matrix is not positive semidefinite";
        return rec;
    }
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    ElectronBasis basis = enumerate_basis(model, Projection::P0);
    BosonSpace bosons = number_bosons(model, opts.n_max_list.back());
    SpMat H = build_hamiltonian(model, basis, bosons).total();
    SpectraOptions so = opts.spectra;
    so.k = 2;
    SpectralResult res = lowest_eigenpairs(H, so);
    DegeneracyResult deg = ground_state_degeneracy(res.values);
    if (deg.verdict != Degeneracy::unique) {
        rec.status = CheckStatus::undecided;
        rec.note = "ground state not resolved as unique";
        return rec;
    }
    VecC v0 = res.vectors.col(0);
    SpMat ib = bosons.identity();
    auto expect = [&](const SpMat& op_e) {
        VecC w = tensor(op_e, ib) * v0;
        return std::real(v0.dot(w));
    };

    double mn = std::numeric_limits<double>::infinity();
    nlohmann::json pairs = nlohmann::json::array();
    for (int x = 0; x < nl; ++x)
        for (int y = x + 1; y < nl; ++y) {
            double c = expect(spin_pair_op(basis, x, y));
            double stat = model.gamma_lambda[x] * model.gamma_lambda[y] * c;
            mn = std::min(mn, stat);
            pairs.push_back({{"kind", "conduction"}, {"a", x}, {"b", y}, {"statistic", stat}});
        }
    auto witness = [&](int u) {
        for (int x = 0; x < nl; ++x)
            if (spec.J(x, u) != 0.0) return x;
        return -1;
    };
    for (int u = 0; u < no; ++u)
        for (int v = u + 1; v < no; ++v) {
            int wx = witness(u), wy = witness(v);
            double c = expect(spin_pair_op(basis, nl + u, nl + v));
            double stat = model.gamma_omega[u] * model.gamma_omega[v] * model.sgn_j[u] *
                          model.sgn_j[v] * c;
            mn = std::min(mn, stat);
            pairs.push_back({{"kind", "f"},
                             {"a", u},
                             {"b", v},
                             {"witness_a", wx},
                             {"witness_b", wy},
                             {"statistic", stat}});
        }
    rec.stats = {{"pairs", pairs}, {"min_statistic", mn}, {"n_max", opts.n_max_list.back()}};
    if (pairs.empty()) {
        rec.status = CheckStatus::skipped;
        rec.note = "no site pairs to test";
    } else {
        rec.status = mn > rec.tol ? CheckStatus::pass : CheckStatus::fail;
    }
    return rec;
}

CheckRecord check_frame_residuals(const ValidatedModel& model, const VerifyOptions& opts) {
    CheckRecord rec;
    rec.name = "transformed-frame-identity";
    rec.claim = "conjugated Hamiltonian matches the directly assembled frame";
    rec.tol = 1e-10;
    auto rows = transformed_frame_residuals(model, opts.n_max_list);
    nlohmann::json stats = nlohmann::json::array();
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        stats.push_back({{"n_max", rows[i].n_max}, {"residual", rows[i].residual}});
        if (i > 0 && rows[i].residual > rows[i - 1].residual + 1e-12) monotone = false;
    }
    rec.stats = {{"rows", stats}, {"monotone", monotone}};
    bool zero_coupling = model.spec.g.cwiseAbs().maxCoeff() == 0.0;
    bool pass = monotone && (!zero_coupling || rows.back().residual < rec.tol);
    rec.status = pass ? CheckStatus::pass : CheckStatus::fail;
    return rec;
}

CheckRecord check_overlap_method(const ValidatedModel& model, const VerifyOptions& opts) {
    CheckRecord rec;
    rec.name = "comparator-ground-state-overlap";
    rec.claim = "transformed and comparator ground states overlap";
    rec.seed = opts.spectra.seed;
    rec.tol = 1e-8;
    if (model.coupling_class == CouplingClass::mixed) {
        rec.status = CheckStatus::skipped;
        rec.note = "mixed coupling signs: no comparator";
        return rec;
    }
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    ElectronBasis none = enumerate_basis(nl, no, Projection::none);
    ElectronBasis q0 = enumerate_basis(nl, no, Projection::Q0);
    BosonSpace bosons = number_bosons(model, opts.n_max_list.back());
    SpMat ib = bosons.identity();

    OperatorBundle bundle = build_transformed(model, q0, bosons);
    SpMat A = bundle.H.total();

    AuxiliaryKind kin = model.coupling_class == CouplingClass::ferromagnetic
                            ? AuxiliaryKind::K_prime
                            : AuxiliaryKind::K1;
    SpMat K = build_auxiliary(kin, model, none).matrix();
    SpMat Uhp = hole_particle(model, none).matrix;
    SpMat KU = SpMat(SpMat(Uhp.adjoint() * K) * Uhp);
    // restrict to the Q0 sector
    std::vector<Eigen::Triplet<cplx>> strips;
    for (std::size_t j = 0; j < q0.dim(); ++j)
        strips.emplace_back(static_cast<int>(*none.find(q0.configs[j])), static_cast<int>(j),
                            cplx(1.0, 0.0));
    SpMat S(static_cast<Eigen::Index>(none.dim()), static_cast<Eigen::Index>(q0.dim()));
    S.setFromTriplets(strips.begin(), strips.end());
    SpMat Kq = SpMat(SpMat(S.adjoint() * KU) * S);
    SpMat B = tensor(Kq, ib);
    {
        SpMat ie(static_cast<int>(q0.dim()), static_cast<int>(q0.dim()));
        ie.setIdentity();
        B += tensor(ie, SpMat(cplx(spec.omega0) * bosons.n_p()));
    }

    SpectraOptions so = opts.spectra;
    so.k = 2;
    SpectralResult ra = lowest_eigenpairs(A, so);
    SpectralResult rb = lowest_eigenpairs(B, so);
    DegeneracyResult da = ground_state_degeneracy(ra.values);
    DegeneracyResult db = ground_state_degeneracy(rb.values);
    if (da.verdict != Degeneracy::unique || db.verdict != Degeneracy::unique) {
        rec.status = CheckStatus::undecided;
        rec.note = "a ground state did not resolve as unique";
        return rec;
    }
    VecC va = ra.vectors.col(0).normalized();
    VecC vb = rb.vectors.col(0).normalized();
    double overlap = std::abs(va.dot(vb));
    // total spin measured in the transformed frame: conjugate the physical
    // S^2 by the particle-hole map before restricting to the sector
    SpMat S2full = SpMat(SpMat(Uhp.adjoint() * s2_total(none)) * Uhp);
    SpMat S2 = tensor(SpMat(SpMat(S.adjoint() * S2full) * S), ib);
    double s2a = std::real(va.dot(VecC(S2 * va)));
    double s2b = std::real(vb.dot(VecC(S2 * vb)));
    rec.stats = {{"overlap", overlap}, {"s2_transformed", s2a}, {"s2_comparator", s2b},
                 {"n_max", opts.n_max_list.back()}};
    rec.status = (overlap > rec.tol && std::abs(s2a - s2b) < 1e-5) ? CheckStatus::pass
                                                                   : CheckStatus::fail;
    return rec;
}

namespace {

CheckRecord from_cone_report(const ConeCheckReport& r, const std::string& claim) {
    CheckRecord rec;
    rec.name = r.check;
    rec.claim = claim;
    rec.status = r.pass ? CheckStatus::pass : CheckStatus::fail;
    rec.stats = to_json(r);
    rec.tol = r.tol;
    rec.seed = r.seed;
    return rec;
}

}  // namespace

std::vector<CheckRecord> check_cone_suite(const ValidatedModel& model, const VerifyOptions& opts) {
    std::vector<CheckRecord> recs;
    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();

    BosonParams bp;
    bp.rep = BosonRep::grid;
    bp.n_points = opts.grid_points;
    bp.extent = opts.grid_extent;
    BosonSpace bosons = build_boson_space(nl, bp);
    ElectronBasis q0 = enumerate_basis(model, Projection::Q0);
    if (q0.dim() * bosons.dim() > opts.cone_dim_cap) {
        CheckRecord rec;
        rec.name = "cone-suite";
        rec.claim = "cone positivity of the transformed semigroup";
        rec.status = CheckStatus::skipped;
        rec.note = "dimension above the configured cap";
        recs.push_back(rec);
        return recs;
    }

    ConeCheckOptions co;
    co.n_samples = opts.n_samples;
    co.seed = opts.seed;

    ConeSpace cone = make_cone(ConeKind::product_psd_grid, model, &bosons);
    OperatorBundle bundle = build_transformed(model, q0, bosons);
    SpMat H = bundle.H.matrix();

    for (double beta : {0.5, 1.0}) {
        std::ostringstream name;
        name << "semigroup-cone-preserving-beta-" << beta;
        recs.push_back(from_cone_report(
            check_pairing_nonneg(name.str(), heat_kernel(H, beta), cone, co),
            "transformed semigroup preserves the product cone"));
    }
    recs.push_back(from_cone_report(
        check_pairing_positive("semigroup-strict-positivity", heat_kernel(H, 1.0), cone, co),
        "shifted semigroup improves cone positivity"));
    try {
        recs.push_back(from_cone_report(
            check_ground_state_positivity("ground-state-cone-interior", H, cone, co),
            "ground state sits strictly inside the cone"));
    } catch (const DegenerateGroundState& e) {
        CheckRecord rec;
        rec.name = "ground-state-cone-interior";
        rec.claim = "ground state sits strictly inside the cone";
        rec.status = CheckStatus::undecided;
        rec.note = e.what();
        recs.push_back(rec);
    }

    // double occupancy dominated by the squared shifted pair-hopping term
    {
        double jmin = min_nonzero_exchange(model);
        SpMat Je = bundle.J_op.matrix();
        SpMat I(Je.rows(), Je.cols());
        I.setIdentity();
        SpMat shifted = SpMat(SpMat(cplx(jmin * (nl + no)) * I) + Je);
        SpMat M = SpMat(cplx(8.0 / (jmin * jmin)) * SpMat(shifted * shifted));
        Eigen::VectorXd docc(q0.dim());
        for (std::size_t i = 0; i < q0.dim(); ++i) {
            const auto& c = q0.configs[i];
            double v = 0.0;
            for (int a = 0; a < nl + no; ++a)
                v += double((c.up >> a) & 1u) * double((c.down >> a) & 1u);
            docc(static_cast<int>(i)) = v;
        }
        SpMat D(static_cast<int>(q0.dim()), static_cast<int>(q0.dim()));
        for (std::size_t i = 0; i < q0.dim(); ++i)
            if (docc(static_cast<int>(i)) != 0.0)
                D.insert(static_cast<int>(i), static_cast<int>(i)) = docc(static_cast<int>(i));
        M -= tensor(D, bosons.identity());
        recs.push_back(from_cone_report(
            check_pairing_nonneg("double-occupancy-inequality", matrix_apply(M), cone, co),
            "squared pair-hopping dominates the double occupancy"));
    }

    // exchange comparator dominates the Hubbard comparator (electron sector)
    if (model.coupling_class != CouplingClass::mixed) {
        bool ferro = model.coupling_class == CouplingClass::ferromagnetic;
        ElectronBasis none = enumerate_basis(nl, no, Projection::none);
        SpMat Uhp = hole_particle(model, none).matrix;
        SpMat K = build_auxiliary(ferro ? AuxiliaryKind::K_prime : AuxiliaryKind::K1, model, none)
                      .matrix();
        SpMat Hh =
            build_auxiliary(ferro ? AuxiliaryKind::H_H_prime : AuxiliaryKind::H_H, model, none)
                .matrix();
        SpMat KU = SpMat(SpMat(Uhp.adjoint() * K) * Uhp);
        SpMat HU = SpMat(SpMat(Uhp.adjoint() * Hh) * Uhp);
        double shift;
        if (!ferro) {
            shift = double(nl) * nl + double(nl) * no;
        } else {
            int l1 = 0, l2 = 0, o1 = 0, o2 = 0;
            for (const auto& s : spec.lambda) (s.sublattice == 1 ? l1 : l2)++;
            for (const auto& s : spec.omega) (s.sublattice == 1 ? o1 : o2)++;
            shift = double(nl) * nl + 2.0 * l1 * o1 + 2.0 * l2 * o2;
        }
        ConeSpace ecorn = make_cone(ConeKind::psd_reshape, model);
        Apply hkK = heat_kernel(KU, 1.0);
        Apply hkH = heat_kernel(HU, 1.0);
        double boost = std::exp(shift);
        Apply diff = [hkK, hkH, boost](const VecC& v) -> VecC {
            return boost * hkK(v) - hkH(v);
        };
        recs.push_back(from_cone_report(
            check_pairing_nonneg("exchange-comparator-domination", diff, ecorn, co),
            "boosted exchange kernel dominates the Hubbard kernel"));
        recs.push_back(from_cone_report(
            check_pairing_positive("hubbard-comparator-positivity", hkH, ecorn, co),
            "Hubbard comparator kernel improves cone positivity"));
    }

    // the phonon heat kernel alone, on the grid cone
    {
        ConeSpace pcone = make_cone(ConeKind::grid_nonneg, model, &bosons);
        SpMat Np = SpMat(cplx(spec.omega0) * bosons.n_p());
        recs.push_back(from_cone_report(
            check_pairing_nonneg("phonon-heat-kernel-nonneg", heat_kernel(Np, 1.0), pcone, co),
            "phonon heat kernel preserves entrywise nonnegativity"));
        recs.push_back(from_cone_report(
            check_pairing_positive("phonon-heat-kernel-strict", heat_kernel(Np, 1.0), pcone, co),
            "phonon heat kernel is entrywise positive"));
    }
    return recs;
}

VerificationReport run_all(const ValidatedModel& model, const VerifyOptions& opts) {
    VerificationReport rep;
    rep.model_digest = model_digest(model);
    rep.seed = opts.seed;
    rep.records.push_back(check_uniqueness(model, opts));
    rep.records.push_back(check_total_spin(model, opts));
    rep.records.push_back(check_correlation_signs(model, opts));
    rep.records.push_back(check_frame_residuals(model, opts));
    rep.records.push_back(check_overlap_method(model, opts));
    if (opts.with_cones) {
        auto cone = check_cone_suite(model, opts);
        rep.records.insert(rep.records.end(), cone.begin(), cone.end());
    }
    return rep;
}

}  // namespace klm
