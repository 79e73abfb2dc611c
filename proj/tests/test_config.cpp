#include <doctest.h>

#include "koopcert/config.hpp"
#include "koopcert/errors.hpp"

using namespace koopcert;

namespace {

std::string message_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const UsageError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults describe the duffing benchmark") {
    const auto cfg = parse_config("{}");
    CHECK(cfg.scenario.system.name == "duffing");
    CHECK(cfg.dictionary_for().size() == 21);
    CHECK(cfg.data.m == 100);
    CHECK(cfg.scenario.horizon == 3.0);
    CHECK(cfg.scenario.dt == 1e-3);
    CHECK(cfg.scenario.control.kind == "random_zoh");
    CHECK(cfg.x0() == Vec::Ones(2));
    CHECK(cfg.certification.horizon == 3.0);
}

TEST_CASE("full document") {
    const auto cfg = parse_config(R"({
        "scenario": {
            "system": {"name": "linear", "a": -1.0, "b": 1.0},
            "domain": {"lower": [-1], "upper": [1]},
            "x0": [0.8], "T": 1.0, "dt": 0.01,
            "constraints": [{"kind": "affine", "a": [1.0], "b": -0.95, "label": "x-0.95"}],
            "observable": {"kind": "sine", "a": [2.0], "quadratic": 0.5},
            "control": {"kind": "constant", "value": [0.0]}
        },
        "dictionary": {"kind": "composite", "base": "fem", "mesh_size": 0.1},
        "data": {"m": 50, "seed": 9, "trials": 3, "m_values": [10, 20]},
        "certification": {"epsilon": 0.1, "delta": 0.2, "dt_check": 0.01},
        "edmdc": {"enabled": false},
        "sweep": {"kind": "fem", "mesh_sizes": [0.2, 0.1], "m_rule": {"kind": "fixed", "value": 100}},
        "output": {"directory": "x", "svg": false}
    })");
    CHECK(cfg.dictionary_for().size() == 22);
    CHECK(cfg.dictionary_for().labels()[0] == "x-0.95");
    CHECK(cfg.constraints()[0].value(Vec::Constant(1, 1.0)) == doctest::Approx(0.05));
    CHECK(cfg.observable().value(Vec::Constant(1, 0.5)) == doctest::Approx(std::sin(1.0) + 0.125));
    CHECK_FALSE(cfg.with_edmdc);
    CHECK(cfg.sweep.m_rule.kind == MRule::Kind::fixed);
    CHECK(cfg.control().at(0.3)[0] == 0.0);
}

TEST_CASE("errors name the offending field") {
    CHECK(message_of(R"({"data": {"m": 0}})").find("data.m: m must be >= 1") != std::string::npos);
    CHECK(message_of(R"({"data": {"mm": 3}})").find("data.mm: unknown key") != std::string::npos);
    CHECK(message_of(R"({"bogus": 1})").find("bogus: unknown key") != std::string::npos);
    CHECK(message_of(R"({"certification": {"epsilon": 0}})").find("certification.epsilon") != std::string::npos);
    CHECK(message_of(R"({"scenario": {"dt": "x"}})").find("scenario.dt: expected a number") != std::string::npos);
    CHECK(message_of(R"({"scenario": {"x0": [1]}})").find("scenario.x0") != std::string::npos);
    CHECK(message_of(R"({"data": {"m_values": [10, 5]}})").find("strictly increasing") != std::string::npos);
    CHECK(message_of(R"({"dictionary": {"kind": "rbf"}})").find("dictionary.kind") != std::string::npos);
    CHECK(message_of(R"({"scenario": {"constraints": [{"kind": "ball", "radius": -1, "center": [0, 0]}]}})")
              .find("scenario.constraints[0].radius") != std::string::npos);
}

TEST_CASE("malformed JSON reports line and column") {
    const auto msg = message_of("{\n  \"data\": {\"m\": 1,}\n}");
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
}

TEST_CASE("hash follows the document and the seed") {
    auto a = parse_config(R"({"data": {"m": 10}})");
    const auto b = parse_config(R"({ "data" : { "m" : 10 } })");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    override_seed(a, 5);
    CHECK(a.hash() != b.hash());
    CHECK(a.data.seed == 5);
}
