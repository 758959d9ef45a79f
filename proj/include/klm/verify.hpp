#pragma once

#include "klm/cones.hpp"
#include "klm/transforms.hpp"

namespace klm {

enum class CheckStatus { pass, fail, undecided, skipped };

const char* to_string(CheckStatus s);

struct CheckRecord {
    std::string name;
    std::string claim;  // what property the check exercises
    CheckStatus status = CheckStatus::undecided;
    nlohmann::json stats;
    double tol = 0.0;
    std::uint64_t seed = 0;
    std::string note;
};

nlohmann::json to_json(const CheckRecord& r);

struct VerifyOptions {
    std::vector<int> n_max_list = {4, 6};
    int grid_points = 32;
    double grid_extent = 7.0;
    int n_samples = 1000;
    std::uint64_t seed = 20240817;
    std::size_t cone_dim_cap = 40000;  // skip cone checks above this dimension
    bool with_cones = true;
    SpectraOptions spectra;
};

struct VerificationReport {
    std::string model_digest;
    std::uint64_t seed = 0;
    std::vector<CheckRecord> records;

    bool all_passed() const;  // no failing record
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

// FNV-1a over the canonical JSON form of the model.
std::string model_digest(const ValidatedModel& model);

// Gap above the ground state of the physical Hamiltonian at the last two
// truncation levels, with a stability comparison between them.
CheckRecord check_uniqueness(const ValidatedModel& model, const VerifyOptions& opts);

// Ground-state total spin against the closed-form prediction.
CheckRecord check_total_spin(const ValidatedModel& model, const VerifyOptions& opts);

// Sign structure of the transverse spin correlators in the ground state,
// with the exchange-coupled witness sites recorded per f-site pair.
CheckRecord check_correlation_signs(const ValidatedModel& model, const VerifyOptions& opts);

// Residuals of the conjugated-versus-assembled transformed operator across
// truncation levels: monotone decay, and exactness when g = 0.
CheckRecord check_frame_residuals(const ValidatedModel& model, const VerifyOptions& opts);

// Ground-state overlap between the transformed Hamiltonian and the
// phonon-dressed comparator, plus agreement of their spin expectations.
CheckRecord check_overlap_method(const ValidatedModel& model, const VerifyOptions& opts);

// Cone-positivity checks on the boson grid: semigroup preservation and
// strict positivity, ground state in the cone interior, the double-occupancy
// operator inequality, the exchange-versus-Hubbard comparator pair, and the
// phonon heat kernel alone.
std::vector<CheckRecord> check_cone_suite(const ValidatedModel& model, const VerifyOptions& opts);

VerificationReport run_all(const ValidatedModel& model, const VerifyOptions& opts = {});

}  // namespace klm
