#include <catch2/catch_amalgamated.hpp>

#include "cavlab/config.hpp"

using namespace cavlab;

TEST_CASE("ini parse and canonical round trip", "[config]") {
  const std::string text = R"(# comment
[grid]
nodes = 65   # trailing comment
dim = 1

[field]
kind = constant
lambda = 1.0
)";
  const Ini ini = Ini::parse(text);
  CHECK(ini.get("grid", "nodes") == "65");
  CHECK(ini.get_int("grid", "dim") == 1);
  CHECK(ini.get_double("field", "lambda") == 1.0);

  const std::string canonical = ini.serialize();
  const Ini back = Ini::parse(canonical);
  CHECK(back.serialize() == canonical);  // parse . serialize fixes the canonical form
  CHECK(back.hash() == ini.hash());
}

TEST_CASE("canonical form sorts sections and keys", "[config]") {
  Ini a = Ini::parse("[b]\nz = 1\na = 2\n[a]\nk = 3\n");
  Ini b = Ini::parse("[a]\nk = 3\n[b]\na = 2\nz = 1\n");
  CHECK(a.serialize() == b.serialize());
  CHECK(a.hash() == b.hash());
}

TEST_CASE("malformed configs are rejected", "[config]") {
  CHECK_THROWS_AS(Ini::parse("[broken\nk = v\n"), ConfigError);
  CHECK_THROWS_AS(Ini::parse("[s]\nnovalue\n"), ConfigError);
  Ini ini = Ini::parse("[grid]\ndim = 2\nnodes = seventeen\n");
  CHECK_THROWS_AS(ini.get_int("grid", "nodes"), ConfigError);
  CHECK_THROWS_AS(ini.get("grid", "missing"), ConfigError);
}

TEST_CASE("experiment config validation", "[config]") {
  Ini good = Ini::parse(R"(
[grid]
dim = 1
nodes = 257
[field]
kind = constant
lambda = 1
Lambda = 1
[boundary]
trace = endpoints
v0 = 0
v1 = 1
[ladder]
eps0 = 0.1
count = 3
)");
  const ExperimentConfig cfg = ExperimentConfig::from_ini(good);
  CHECK(cfg.grid.n == 257);
  CHECK(cfg.ladder.count == 3);
  const CoefficientField f = cfg.make_field();
  CHECK(f.a11[0] == 1.0);
  const BoundaryData b = cfg.make_boundary();
  CHECK(b.values[cfg.grid.n - 1] == 1.0);

  // lambda > Lambda rejected at validation with a field-scoped message
  Ini bad = good;
  bad.sections["field"]["lambda"] = "4";
  bad.sections["field"]["Lambda"] = "1";
  try {
    ExperimentConfig::from_ini(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("[field]") != std::string::npos);
  }

  Ini bad2 = good;
  bad2.sections["ladder"]["eps0"] = "1e-9";  // below grid spacing
  CHECK_THROWS_AS(ExperimentConfig::from_ini(bad2), ConfigError);

  Ini bad3 = good;
  bad3.sections["boundary"]["trace"] = "no_such_trace";
  CHECK_THROWS_AS(ExperimentConfig::from_ini(bad3).make_boundary(), ConfigError);
}

TEST_CASE("config hash is stable across raw-value formatting", "[config]") {
  // raw strings are preserved, so the hash keys on the canonical text
  Ini a = Ini::parse("[grid]\ndim = 1\nnodes = 257\n");
  Ini b = Ini::parse("   [grid]  \n  dim=1\n nodes   =    257\n");
  CHECK(a.hash() == b.hash());
}
