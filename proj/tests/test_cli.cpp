#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

#include "klm/model.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* p = std::getenv("KLM_CLI");
    REQUIRE_MESSAGE(p != nullptr, "KLM_CLI must point at the CLI binary");
    return p;
}

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args, const fs::path& workdir) {
    fs::path log = workdir / "cli.log";
    std::string cmd = "cd " + workdir.string() + " && " + cli_path() + " " + args + " > " +
                      log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    return {code, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& tag) {
    fs::path d = fs::temp_directory_path() / ("klm-cli-test-" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write_chain_model(const fs::path& p, double J = 1.0, double U = 1.0, double g = 0.5) {
    klm::ExampleParams params;
    params.t = 1.0; params.J = J; params.U = U; params.g = g; params.omega0 = 1.0;
    std::ofstream os(p);
    os << klm::model_to_json(klm::example_model("example1", 2, params)).dump(2) << "\n";
}

}  // namespace

TEST_CASE("validate subcommand exit codes") {
    fs::path dir = fresh_dir("validate");
    SUBCASE("valid model") {
        write_chain_model(dir / "model.json");
        auto r = run_cli("validate model.json", dir);
        CHECK(r.exit_code == 0);
        CHECK(r.output.find("ok") != std::string::npos);
    }
    SUBCASE("condition violations are printed with labels") {
        // odd conduction-site count
        nlohmann::json j;
        {
            klm::ExampleParams params;
            j = klm::model_to_json(klm::example_model("example1", 2, params));
        }
        j["lambda"].push_back({{"id", "c2"}, {"sublattice", 1}});
        for (const char* key : {"t", "U", "g"}) {
            for (auto& row : j[key]) row.push_back(0.0);
            j[key].push_back(nlohmann::json::array({0.0, 0.0, 0.0}));
        }
        j["J"].push_back(nlohmann::json::array({0.0, 0.0}));
        // keep the hopping graph connected through the new site
        j["t"][1][2] = j["t"][2][1] = 1.0;
        std::ofstream(dir / "odd.json") << j.dump(2);
        auto r = run_cli("validate odd.json", dir);
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("C.4") != std::string::npos);
    }
    SUBCASE("unreadable input") {
        std::ofstream(dir / "broken.json") << "{ not json";
        CHECK(run_cli("validate broken.json", dir).exit_code == 2);
        CHECK(run_cli("validate missing.json", dir).exit_code == 2);
    }
}

TEST_CASE("solve subcommand") {
    fs::path dir = fresh_dir("solve");
    write_chain_model(dir / "model.json");
    SUBCASE("writes the spectrum and reruns byte-identically") {
        auto r1 = run_cli("solve model.json --nmax 2", dir);
        REQUIRE(r1.exit_code == 0);
        std::string first = slurp(dir / "out/spectrum.json");
        REQUIRE_FALSE(first.empty());
        nlohmann::json j = nlohmann::json::parse(first);
        CHECK(j["schema_version"] == 1);
        CHECK(j["E0"].is_number());
        CHECK(j["gap"].is_number());
        CHECK(j["S"].is_number());
        CHECK(j["correlators"].is_array());
        CHECK(j["gap"].get<double>() > 0.0);

        auto r2 = run_cli("solve model.json --nmax 2", dir);
        REQUIRE(r2.exit_code == 0);
        CHECK(r2.output.find("cache hit") != std::string::npos);
        CHECK(slurp(dir / "out/spectrum.json") == first);
        // cache directory holds the digest-named copy
        bool cached = false;
        for (auto& e : fs::directory_iterator(dir / "out/cache"))
            if (e.path().extension() == ".json") cached = true;
        CHECK(cached);
    }
    SUBCASE("--no-cache recomputes but produces the same bytes") {
        auto r1 = run_cli("solve model.json --nmax 2 --no-cache", dir);
        REQUIRE(r1.exit_code == 0);
        CHECK_FALSE(fs::exists(dir / "out/cache"));
        std::string first = slurp(dir / "out/spectrum.json");
        auto r2 = run_cli("solve model.json --nmax 2 --no-cache", dir);
        REQUIRE(r2.exit_code == 0);
        CHECK(slurp(dir / "out/spectrum.json") == first);
    }
    SUBCASE("truncation sweep emits one row per level") {
        auto r = run_cli("solve model.json --nmax 2 --nmax-sweep 2,4", dir);
        REQUIRE(r.exit_code == 0);
        std::string csv = slurp(dir / "out/sweep.csv");
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
        CHECK(csv.rfind("n_max,E0,gap,S2,S", 0) == 0);
    }
    SUBCASE("invalid model is a hard error") {
        write_chain_model(dir / "bad.json");
        nlohmann::json j = nlohmann::json::parse(slurp(dir / "bad.json"));
        j["g"][0][0] = 2.0;  // unequal column sums
        std::ofstream(dir / "bad.json") << j.dump(2);
        CHECK(run_cli("solve bad.json --nmax 2", dir).exit_code == 2);
    }
}

TEST_CASE("verify subcommand") {
    fs::path dir = fresh_dir("verify");
    // g = 0.3: the frame residual already shrinks from n_max = 2 there
    write_chain_model(dir / "model.json", 1.0, 1.0, 0.3);
    auto r = run_cli("verify model.json --nmax-sweep 2,4 --no-cones", dir);
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("[pass]") != std::string::npos);
    CHECK(r.output.find("[fail]") == std::string::npos);
    nlohmann::json j = nlohmann::json::parse(slurp(dir / "out/report.json"));
    CHECK(j["schema_version"] == 1);
    CHECK(j["records"].is_array());
    CHECK(fs::exists(dir / "out/report.csv"));
}
