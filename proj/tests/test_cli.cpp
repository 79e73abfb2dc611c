#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(KOOPCERT_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
    const std::string cmd = std::string(KOOPCERT_CLI) + " " + args + " > " + (kWork / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream(p) << text;
    return p;
}

int count_lines(const std::string& s, const std::string& skip_prefix) {
    std::istringstream in(s);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (line.rfind(skip_prefix, 0) != 0) ++n;
    return n;
}

const char* kDuffing = R"({
  "scenario": {"T": 3.0, "dt": 0.001,
               "constraints": [{"kind": "affine", "a": [1, 0], "b": -10, "label": "x1-10"}]},
  "dictionary": {"kind": "monomial", "degree": 5},
  "data": {"m": 100, "seed": 1},
  "certification": {"epsilon": 0.1, "dt_check": 0.001}
})";

}  // namespace

TEST_CASE("fit, predict and certify") {
    const auto cfg = write_config("duffing.json", kDuffing);
    const fs::path out = kWork / "duffing";
    fs::remove_all(out);
    REQUIRE(run("fit --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto manifest = nlohmann::json::parse(slurp(out / "surrogate.json"));
    CHECK(manifest.at("N") == 21);
    CHECK(manifest.at("generators").size() == 2);
    CHECK(fs::exists(out / "L0.csv"));
    CHECK(fs::exists(out / "L_e1.csv"));
    CHECK(slurp(out / "L0.csv").find("config_hash=") != std::string::npos);

    REQUIRE(run("predict --config " + cfg.string() + " --out " + out.string()) == 0);
    const std::string csv = slurp(out / "prediction.csv");
    CHECK(csv.find("t,h_true,h_bilinear,h_edmdc,rel_err_bilinear,rel_err_edmdc\n") != std::string::npos);
    CHECK(count_lines(csv, "#") == 3002);  // header + 3001 rows
    CHECK(fs::exists(out / "prediction.svg"));

    REQUIRE(run("predict --no-edmdc --config " + cfg.string() + " --out " + out.string()) == 0);
    const std::string plain = slurp(out / "prediction.csv");
    CHECK(plain.find("edmdc") == std::string::npos);
    CHECK(plain.find("t,h_true,h_bilinear,rel_err_bilinear\n") != std::string::npos);

    SUBCASE("certified") {
        const auto short_cfg = write_config("certify_ok.json", R"({
          "scenario": {"T": 1.0, "constraints": [{"kind": "affine", "a": [1, 0], "b": -10, "label": "x1-10"}]},
          "data": {"m": 100, "seed": 1},
          "certification": {"epsilon": 0.1}
        })");
        CHECK(run("certify --config " + short_cfg.string() + " --surrogate " + (out / "surrogate.json").string() +
                  " --out " + (kWork / "cert_ok").string()) == 0);
        const auto cert = nlohmann::json::parse(slurp(kWork / "cert_ok" / "certificate.json"));
        CHECK(cert.at("verdicts")[0].at("verdict") == "certified");
        CHECK(cert.at("all_certified") == true);
        CHECK(cert.contains("config_hash"));
    }
    SUBCASE("rejected") {
        const auto bad_cfg = write_config("certify_bad.json", R"({
          "scenario": {"T": 1.0, "constraints": [{"kind": "affine", "a": [-1, 0], "b": 10, "label": "10-x1"}]},
          "data": {"m": 100, "seed": 1},
          "certification": {"epsilon": 20}
        })");
        CHECK(run("certify --config " + bad_cfg.string() + " --surrogate " + out.string() + " --out " +
                  (kWork / "cert_bad").string()) == 1);
        const auto cert = nlohmann::json::parse(slurp(kWork / "cert_bad" / "certificate.json"));
        CHECK(cert.at("verdicts")[0].at("verdict") == "rejected");
        CHECK(cert.at("verdicts")[0].at("first_failure_time") == 0.0);
    }
    SUBCASE("epsilon zero") {
        const auto zero = write_config("certify_zero.json", R"({"certification": {"epsilon": 0},
          "scenario": {"constraints": [{"kind": "affine", "a": [1, 0], "b": -10}]}})");
        CHECK(run("certify --config " + zero.string() + " --surrogate " + out.string()) == 2);
    }
}

TEST_CASE("usage errors exit with 2") {
    CHECK(run("") == 2);
    CHECK(run("fit") == 2);
    CHECK(run("fit --config " + write_config("broken.json", "{\n \"data\": {\"m\": 1,}\n}").string()) == 2);
    CHECK(slurp(kWork / "last.log").find("line 2") != std::string::npos);
    CHECK(run("fit --config " + write_config("m0.json", R"({"data": {"m": 0}})").string()) == 2);
    CHECK(slurp(kWork / "last.log").find("m must be >= 1") != std::string::npos);
    CHECK(run("predict --config " + write_config("ok.json", "{}").string() + " --surrogate " +
              (kWork / "missing.json").string()) == 2);
    CHECK(run("sweep --threads 0 --config " + (kWork / "ok.json").string()) == 2);
}

TEST_CASE("numerical failures exit with 3") {
    const auto cfg = write_config("tiny.json", R"({"data": {"m": 3}, "dictionary": {"degree": 3}})");
    CHECK(run("fit --config " + cfg.string() + " --out " + (kWork / "tiny").string()) == 3);
    CHECK(slurp(kWork / "last.log").find("rank deficient") != std::string::npos);
}

TEST_CASE("sweeps are reproducible and resumable") {
    const auto cfg = write_config("sweep.json", R"({
      "scenario": {"T": 1.0, "dt": 0.01},
      "dictionary": {"degree": 2},
      "data": {"m_values": [50, 100], "trials": 4, "seed": 3},
      "sweep": {"kind": "generator", "epsilons": [1, 5]}
    })");
    const fs::path a = kWork / "sweep_a", b = kWork / "sweep_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run("sweep --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run("sweep --threads 1 --config " + cfg.string() + " --out " + b.string()) == 0);
    const std::string csv = slurp(a / "sweep_generator.csv");
    CHECK(csv == slurp(b / "sweep_generator.csv"));
    CHECK(count_lines(csv, "#") == 1 + 2 * 4);
    const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
    CHECK(summary.contains("generated_at"));
    CHECK(summary.contains("config_hash"));
    CHECK(fs::exists(a / "sweep_generator.svg"));

    REQUIRE(run("sweep --resume --config " + cfg.string() + " --out " + a.string()) == 0);
    CHECK(slurp(kWork / "last.log").find("resuming: 8 cells") != std::string::npos);
    CHECK(slurp(a / "sweep_generator.csv") == csv);

    REQUIRE(run("sweep --seed 4 --config " + cfg.string() + " --out " + b.string()) == 0);
    CHECK(slurp(b / "sweep_generator.csv") != csv);
}

TEST_CASE("thread count from the environment") {
    const auto cfg = write_config("sweep_env.json", R"({"dictionary": {"degree": 1},
      "data": {"m_values": [20], "trials": 2}, "scenario": {"T": 0.1, "dt": 0.01}})");
    CHECK(run("sweep --config " + cfg.string() + " --out " + (kWork / "env").string()) == 0);
    CHECK(setenv("KOOPMAN_CERTIFY_THREADS", "nope", 1) == 0);
    CHECK(run("sweep --config " + cfg.string() + " --out " + (kWork / "env").string()) == 2);
    CHECK(setenv("KOOPMAN_CERTIFY_THREADS", "2", 1) == 0);
    CHECK(run("sweep --config " + cfg.string() + " --out " + (kWork / "env").string()) == 0);
    unsetenv("KOOPMAN_CERTIFY_THREADS");
}

TEST_CASE("duffing-bench writes threshold crossings") {
    const auto cfg = write_config("bench.json", R"({"sweep": {"seeds": 3}, "scenario": {"T": 1.0}})");
    const fs::path out = kWork / "bench";
    REQUIRE(run("duffing-bench --config " + cfg.string() + " --out " + out.string()) == 0);
    const auto summary = nlohmann::json::parse(slurp(out / "benchmark_summary.json"));
    CHECK(summary.at("threshold_crossings").size() == 3);
    CHECK(count_lines(slurp(out / "benchmark.csv"), "#") == 1002);
    CHECK(fs::exists(out / "benchmark.svg"));
    REQUIRE(run("sweep --config " + write_config("bench_sweep.json", R"({"sweep": {"kind": "duffing-benchmark", "seeds": 2}, "scenario": {"T": 0.5}})").string() + " --out " + (kWork / "bench2").string()) == 0);
    CHECK(fs::exists(kWork / "bench2" / "benchmark_summary.json"));
}
