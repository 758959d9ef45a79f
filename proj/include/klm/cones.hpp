#pragma once

#include <random>

#include "klm/spectra.hpp"

#include <json.hpp>

namespace klm {

struct UnsupportedExactTest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateGroundState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Identification of the half-filled S3 = 0 electron space with matrices over
// the fixed-particle-number masks: a vector indexed by (up mask, down mask)
// pairs becomes the matrix with that entry at (row = up, col = down). With
// the up modes ordered before the down modes, operator strings with an even
// number of down factors act by plain left/right matrix multiplication.
struct HSIdentification {
    int n_sites = 0;
    int nF = 0;                        // number of half-filling masks
    std::vector<std::uint32_t> masks;  // lex ascending
    std::unordered_map<std::uint32_t, int> mask_index;
    ElectronBasis none;  // the half-filled S3 = 0 basis the vectors live on

    Eigen::MatrixXcd reshape(const VecC& psi) const;
    VecC unreshape(const Eigen::MatrixXcd& Psi) const;
    // Vector for the rank-one matrix x x^dag, x indexed by masks.
    VecC rank_one(const VecC& x) const;
};

HSIdentification build_identification(int n_lambda, int n_omega);

enum class ConeKind {
    psd_reshape,         // reshape of the half-filled vector is PSD
    sector_psd_reshape,  // same, vectors restricted to the doubly-occupied-f sector
    grid_nonneg,         // entrywise nonnegative on the boson grid
    product_psd_grid,    // conical hull of (sector PSD ray) x (nonneg grid vector)
};

// A self-dual cone together with the space its vectors live on. The electron
// basis is the `none` basis for psd_reshape and the Q0 basis for the sector
// kinds; bosons are required for the grid and product kinds.
struct ConeSpace {
    ConeKind kind;
    HSIdentification ident;      // psd kinds
    ElectronBasis basis;         // basis of the electron factor
    const BosonSpace* bosons = nullptr;

    std::size_t dim() const;
    // Random ray, unit norm.
    VecC sample(std::mt19937_64& rng) const;
    // Coordinate-style extreme rays (basis-vector reshapes / grid points),
    // at most max_count of them, chosen deterministically from the front.
    std::vector<VecC> coordinate_rays(int max_count) const;
    // Membership up to tol. Throws UnsupportedExactTest for the product cone
    // unless the vector factorizes to numerical rank one.
    bool contains(const VecC& v, double tol) const;
};

ConeSpace make_cone(ConeKind kind, const ValidatedModel& model, const BosonSpace* bosons = nullptr);

struct ConeCheckOptions {
    int n_samples = 1000;
    std::uint64_t seed = 20240817;
    double tol = 1e-10;          // slack for nonnegativity statistics
    double tol_strict = 1e-12;   // floor for strict positivity statistics
    bool include_coordinate_rays = true;
    int krylov_dim = 60;
};

struct ConeCheckReport {
    std::string check;
    std::string cone;
    std::uint64_t seed = 0;
    int n_samples = 0;
    double min_statistic = 0.0;
    double tol = 0.0;
    bool pass = false;
};

nlohmann::json to_json(const ConeCheckReport& r);

using Apply = std::function<VecC(const VecC&)>;

Apply heat_kernel(const SpMat& H, double beta, double constant = 0.0, int krylov_dim = 60);
Apply matrix_apply(const SpMat& M);

// min over sampled generator pairs of Re<w, op(u)>; pass when the minimum
// clears -tol.
ConeCheckReport check_pairing_nonneg(const std::string& name, const Apply& op,
                                     const ConeSpace& cone, const ConeCheckOptions& opts);

// Same statistic over random generators only; pass when it exceeds
// tol_strict.
ConeCheckReport check_pairing_positive(const std::string& name, const Apply& op,
                                       const ConeSpace& cone, const ConeCheckOptions& opts);

// Ground state of H paired against random generators after a phase fix.
// Throws DegenerateGroundState when the low end of the spectrum does not
// resolve a unique ground state.
ConeCheckReport check_ground_state_positivity(const std::string& name, const SpMat& H,
                                              const ConeSpace& cone,
                                              const ConeCheckOptions& opts);

}  // namespace klm
