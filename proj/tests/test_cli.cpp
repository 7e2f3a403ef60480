#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "magstep/cli.hpp"
#include "magstep/moments.hpp"

namespace fs = std::filesystem;
using namespace magstep;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("magstep_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("default config round-trips with a stable hash") {
    const RunConfig c = default_config();
    const std::string canon = canonical_config(c);
    const RunConfig back = config_from_json(Json::parse(canon));
    CHECK(canonical_config(back) == canon);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(config_hash(c).size() == 64);
    RunConfig d = c;
    d.eta = 0.1;
    CHECK(config_hash(d) != config_hash(c));
  }

  TEST_CASE("canonical form sorts keys regardless of input order") {
    const Json a = Json::parse(R"({"eta": 0.1, "a": -0.25, "curve": {"semi_minor": 1, "kind": "ellipse"}})");
    const Json b = Json::parse(R"({"curve": {"kind": "ellipse", "semi_minor": 1}, "a": -0.25, "eta": 0.1})");
    CHECK(config_hash(config_from_json(a)) == config_hash(config_from_json(b)));
  }

  TEST_CASE("sha256 of a known string") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("range checks") {
    CHECK(code_of([] { config_from_json(Json::parse(R"({"a": 0.0})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"a": -1.5})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"eta": 0.25})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"model": "other"})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"grid": {"n_sigmas": 3}})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"schema_version": 7})")); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { config_from_json(Json::parse(R"({"h_list": [0.01, -1]})")); }) == ErrorCode::ConfigInvalid);
    CHECK_NOTHROW(config_from_json(Json::parse(R"({"a": -1.0})")));
  }

  TEST_CASE("CSV header carries schema and config hash") {
    const CsvTable t{"demo", {"x", "y"}, {{1.0, 0.5}, {2.0, 1e-300}}};
    const std::string s = format_csv(t, "abc123");
    std::istringstream in(s);
    std::string l1, l2, l3;
    std::getline(in, l1);
    std::getline(in, l2);
    std::getline(in, l3);
    CHECK(l1 == "# schema=magstep.demo.v1 config_sha256=abc123");
    CHECK(l2 == "x,y");
    CHECK(l3 == "1,0.5");
    CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
  }

  TEST_CASE("atomic write leaves no temporaries") {
    const fs::path d = scratch_dir("atomic");
    atomic_write((d / "sub" / "f.txt").string(), "hello");
    atomic_write((d / "sub" / "f.txt").string(), "world");
    CHECK(slurp(d / "sub" / "f.txt") == "world");
    int n = 0;
    for (const auto& e : fs::directory_iterator(d / "sub")) n += e.is_regular_file();
    CHECK(n == 1);
    fs::remove_all(d);
  }

  TEST_CASE("cache serves identical bytes and rejects corruption") {
    const fs::path d = scratch_dir("cache");
    RunConfig c = default_config();
    c.cache_dir = (d / "cache").string();
    c.curve.nodes = 512;
    RunOptions o;
    o.out_dir = (d / "out1").string();
    bool hit = true;
    const ResultRecord first = run_command("curve", c, o, &hit);
    CHECK_FALSE(hit);
    const std::string csv1 = slurp(d / "out1" / "curve.csv");
    CHECK(csv1.rfind("# schema=magstep.curve.v1 config_sha256=" + config_hash(c), 0) == 0);

    o.out_dir = (d / "out2").string();
    const ResultRecord second = run_command("curve", c, o, &hit);
    CHECK(hit);
    CHECK(record_to_json(second).dump() == record_to_json(first).dump());
    CHECK(slurp(d / "out2" / "curve.csv") == csv1);
    CHECK(slurp(d / "out2" / "curve.record.json") == slurp(d / "out1" / "curve.record.json"));

    // flip one payload byte: checksum mismatch, recomputed
    const Cache cache(c.cache_dir);
    const std::string key = "curve-" + config_hash(c);
    std::string raw = slurp(cache.path_for(key));
    const auto pos = raw.find("\"half_length\"");
    REQUIRE(pos != std::string::npos);
    raw[raw.find_first_of("0123456789", pos)] ^= 1;
    std::ofstream(cache.path_for(key), std::ios::binary) << raw;
    CHECK_FALSE(cache.load(key).has_value());
    o.out_dir = (d / "out3").string();
    const ResultRecord third = run_command("curve", c, o, &hit);
    CHECK_FALSE(hit);
    CHECK(third.outputs == first.outputs);
    CHECK(slurp(d / "out3" / "curve.csv") == csv1);
    CHECK(cache.load(key).has_value());
    fs::remove_all(d);
  }

  TEST_CASE("constants for a = -1 reproduce the de Gennes pair") {
    const fs::path d = scratch_dir("constants");
    RunConfig c = default_config();
    c.cache_dir = (d / "cache").string();
    c.a_list = {-1.0, -0.5};
    RunOptions o;
    o.out_dir = (d / "out").string();
    const ResultRecord r = run_command("constants", c, o);
    const Json& dg = r.outputs.at("degennes");
    const Json& e = r.outputs.at("edge_constants").at(0);
    CHECK(e.at("beta").get<double>() == doctest::Approx(dg.at("theta0").get<double>()).epsilon(1e-5));
    CHECK(e.at("zeta").get<double>() == doctest::Approx(dg.at("xi0").get<double>()).epsilon(1e-4));
    const Json& h = r.outputs.at("edge_constants").at(1);
    const double theta0 = dg.at("theta0").get<double>(), beta = h.at("beta").get<double>();
    CHECK(0.5 * theta0 < beta);
    CHECK(beta < std::min(0.5, theta0));
    CHECK(fs::exists(d / "out" / "edge_constants.csv"));
    CHECK(fs::exists(d / "out" / "moments.json"));
    const Json m = Json::parse(slurp(d / "out" / "moments.json"));
    CHECK(m.size() == 2);
    CHECK(std::abs(m.at(1).at("identity_residuals").at("m1").get<double>()) < 1e-8);
    fs::remove_all(d);
  }

  TEST_CASE("predict pipeline columns and error paths") {
    const fs::path d = scratch_dir("predict");
    RunConfig c = default_config();
    c.cache_dir = (d / "cache").string();
    c.h_list = {0.01, 0.02};
    RunOptions o;
    o.out_dir = (d / "out").string();
    run_command("predict", c, o);
    std::istringstream csv(slurp(d / "out" / "predict.csv"));
    std::string l1, l2;
    std::getline(csv, l1);
    std::getline(csv, l2);
    CHECK(l2 == "h,gap_predicted,S_u,S_d,A_u,A_d,g,gamma0,phase");

    RunConfig neu = c;
    neu.model = "neumann";
    const ResultRecord rn = run_command("predict", neu, o);
    CHECK(rn.outputs.at("band").contains("theta0"));

    RunConfig circle = c;
    circle.curve.semi_major = circle.curve.semi_minor = 1.0;
    try {
      run_command("predict", circle, o);
      FAIL("expected a well failure");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WellValidationFailed);
      CHECK(exit_code_for(e) == 2);
    }
    fs::remove_all(d);
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(Error(ErrorCode::ConfigInvalid, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorCode::SymmetryViolation, "x")) == 2);
    CHECK(exit_code_for(Error(ErrorCode::ConvergenceFailure, "x")) == 3);
    CHECK(exit_code_for(std::runtime_error("x")) == 3);
  }

  TEST_CASE("tightened tolerances fail with diagnostics, not crashes") {
    RunConfig c = default_config();
    c.acceptance.xi0_tol = 1e-12;
    c.acceptance.min_rule.curve.cos = {{2, 0.1}, {3, 0.02}};  // single well
    RunOptions o;
    const AcceptanceReport r = run_acceptance(c, o, {1, 6});
    REQUIRE(r.criteria.size() == 2);
    CHECK_FALSE(r.criteria[0].pass);
    CHECK(r.criteria[0].detail.find("xi0") != std::string::npos);
    CHECK_FALSE(r.criteria[1].pass);
    CHECK(r.criteria[1].detail.find("WellValidationFailed") != std::string::npos);
    CHECK_FALSE(r.all_pass());
  }

  TEST_CASE("skip-2d leaves out the double-well criterion only") {
    RunConfig c = default_config();
    RunOptions o;
    o.skip_2d = true;
    const AcceptanceReport r = run_acceptance(c, o, {9, 10});
    REQUIRE(r.criteria.size() == 2);
    CHECK(r.criteria[0].skipped);
    CHECK(r.criteria[1].pass);
    CHECK(r.all_pass());
  }
}
