#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "klm/verify.hpp"

namespace fs = std::filesystem;
using namespace klm;

namespace {

struct RunConfig {
    std::string model_path;
    std::string bosons = "number";
    int n_max = 6;
    int grid_points = 48;
    double grid_extent = 7.0;
    int k = 2;
    double tol = 1e-11;
    std::uint64_t seed = 20240817;
    int samples = 1000;
    std::string out = "out";
    bool no_cache = false;
    bool no_cones = false;
    std::vector<int> nmax_sweep;

    nlohmann::json to_json() const {
        return {{"bosons", bosons},         {"n_max", n_max},
                {"grid_points", grid_points}, {"grid_extent", grid_extent},
                {"k", k},                   {"tol", tol},
                {"seed", seed},             {"samples", samples},
                {"nmax_sweep", nmax_sweep}, {"no_cones", no_cones}};
    }
};

std::string digest_string(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_file(const fs::path& p, const std::string& bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    os << bytes;
}

BosonSpace make_bosons(const ValidatedModel& model, const RunConfig& cfg) {
    BosonParams bp;
    if (cfg.bosons == "grid") {
        bp.rep = BosonRep::grid;
        bp.n_points = cfg.grid_points;
        bp.extent = cfg.grid_extent;
    } else {
        bp.rep = BosonRep::number;
        bp.n_max = cfg.n_max;
    }
    return build_boson_space(model.spec.n_lambda(), bp);
}

int cmd_validate(const RunConfig& cfg) {
    ModelSpec spec;
    try {
        spec = load_model(cfg.model_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        std::vector<Violation> violations = condition_violations(spec);
        if (violations.empty()) {
            std::cout << "ok\n";
            return 0;
        }
        for (const auto& v : violations) std::cout << v.condition << ": " << v.detail << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

std::string solve_report(const ValidatedModel& model, const RunConfig& cfg) {
    ElectronBasis basis = enumerate_basis(model, Projection::P0);
    BosonSpace bosons = make_bosons(model, cfg);
    SpMat H = build_hamiltonian(model, basis, bosons).total();

    SpectraOptions so;
    so.k = std::max(cfg.k, 2);
    so.tol = cfg.tol;
    so.seed = cfg.seed;
    SpectralResult res = lowest_eigenpairs(H, so);

    SpMat ib = bosons.identity();
    VecC v0 = res.vectors.col(0).normalized();
    auto expect = [&](const SpMat& op_e) {
        VecC w = tensor(op_e, ib) * v0;
        return std::real(v0.dot(w));
    };
    double s2 = expect(s2_total(basis));
    double s = 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(0.0, s2)));

    const ModelSpec& spec = model.spec;
    const int nl = spec.n_lambda();
    const int no = spec.n_omega();
    nlohmann::json correlators = nlohmann::json::array();
    for (int x = 0; x < nl; ++x)
        for (int y = x + 1; y < nl; ++y)
            correlators.push_back({{"kind", "conduction"},
                                   {"a", x},
                                   {"b", y},
                                   {"value", expect(spin_pair_op(basis, x, y))}});
    for (int u = 0; u < no; ++u)
        for (int v = u + 1; v < no; ++v)
            correlators.push_back({{"kind", "f"},
                                   {"a", u},
                                   {"b", v},
                                   {"value", expect(spin_pair_op(basis, nl + u, nl + v))}});

    nlohmann::json eigenvalues = nlohmann::json::array();
    for (Eigen::Index i = 0; i < res.values.size(); ++i) eigenvalues.push_back(res.values(i));

    nlohmann::json j = {{"schema_version", 1},
                        {"model_digest", model_digest(model)},
                        {"config", cfg.to_json()},
                        {"E0", res.values(0)},
                        {"gap", res.values(1) - res.values(0)},
                        {"S2", s2},
                        {"S", s},
                        {"eigenvalues", eigenvalues},
                        {"correlators", correlators},
                        {"dense", res.dense}};
    return j.dump(2) + "\n";
}

int cmd_solve(const RunConfig& cfg) {
    ModelSpec spec = load_model(cfg.model_path);
    ValidatedModel model = validate(spec);

    std::string key = model_to_json(spec).dump() + "|" + cfg.to_json().dump();
    std::string digest = digest_string(key);
    fs::path out(cfg.out);
    fs::path cache = out / "cache" / (digest + ".json");

    std::string report;
    if (!cfg.no_cache && fs::exists(cache)) {
        std::ifstream is(cache, std::ios::binary);
        report.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
        std::cout << "cache hit: " << cache.string() << "\n";
    } else {
        report = solve_report(model, cfg);
        if (!cfg.no_cache) write_file(cache, report);
    }
    write_file(out / "spectrum.json", report);
    std::cout << "wrote " << (out / "spectrum.json").string() << "\n";

    if (!cfg.nmax_sweep.empty()) {
        SpectraOptions so;
        so.k = std::max(cfg.k, 2);
        so.tol = cfg.tol;
        so.seed = cfg.seed;
        auto rows = truncation_sweep(model, cfg.nmax_sweep, so);
        std::ostringstream csv;
        csv << "n_max,E0,gap,S2,S\n";
        csv.precision(16);
        for (const auto& r : rows)
            csv << r.n_max << ',' << r.e0 << ',' << r.gap << ',' << r.s2 << ',' << r.s << '\n';
        write_file(out / "sweep.csv", csv.str());
        std::cout << "wrote " << (out / "sweep.csv").string() << "\n";
    }
    return 0;
}

int cmd_verify(const RunConfig& cfg) {
    ModelSpec spec = load_model(cfg.model_path);
    ValidatedModel model = validate(spec);

    VerifyOptions vo;
    if (!cfg.nmax_sweep.empty()) vo.n_max_list = cfg.nmax_sweep;
    vo.grid_points = cfg.grid_points;
    vo.grid_extent = cfg.grid_extent;
    vo.n_samples = cfg.samples;
    vo.seed = cfg.seed;
    vo.with_cones = !cfg.no_cones;
    vo.spectra.tol = cfg.tol;
    vo.spectra.seed = cfg.seed;

    VerificationReport rep = run_all(model, vo);
    fs::path out(cfg.out);
    write_file(out / "report.json", rep.to_json().dump(2) + "\n");
    write_file(out / "report.csv", rep.to_csv());
    for (const auto& r : rep.records)
        std::cout << "[" << to_string(r.status) << "] " << r.name
                  << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
    std::cout << "wrote " << (out / "report.json").string() << "\n";
    return rep.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kondo lattice model with phonons: build, solve, verify"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("model", cfg.model_path, "model JSON file")->required();
        sub->add_option("--bosons", cfg.bosons, "boson representation")
            ->check(CLI::IsMember({"number", "grid"}));
        sub->add_option("--nmax", cfg.n_max, "number-basis levels per mode");
        sub->add_option("--grid-points", cfg.grid_points, "grid points per mode");
        sub->add_option("--grid-extent", cfg.grid_extent, "grid half-width");
        sub->add_option("--k", cfg.k, "eigenpairs to compute");
        sub->add_option("--tol", cfg.tol, "eigensolver tolerance")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--samples", cfg.samples, "cone sample count");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_flag("--no-cache", cfg.no_cache, "bypass the result cache");
        sub->add_flag("--no-cones", cfg.no_cones, "skip the cone suite in verify");
        sub->add_option("--nmax-sweep", cfg.nmax_sweep, "truncation sweep levels")
            ->delimiter(',');
    };

    CLI::App* validate = app.add_subcommand("validate", "check the model conditions");
    CLI::App* solve = app.add_subcommand("solve", "ground-state spectrum and correlators");
    CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
    add_common(validate);
    add_common(solve);
    add_common(verify);

    CLI11_PARSE(app, argc, argv);
    try {
        if (validate->parsed()) return cmd_validate(cfg);
        if (solve->parsed()) return cmd_solve(cfg);
        if (verify->parsed()) return cmd_verify(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
