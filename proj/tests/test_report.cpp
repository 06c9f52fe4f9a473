#include "oulab/report.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace oulab;

namespace {

ProbeReport sample() {
  ProbeReport r("probe", "a claim");
  r.setInput("rho", 3);
  r.setInput("regime", "full");
  r.setSeed(7);
  r.setStatistic("value", 0.25);
  r.setPass("finite", true);
  r.addTable("curve", {"a claim", {"t", "v"}, {{0.5, 1}, {1, 2}}});
  return r;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST_SUITE("report") {

TEST_CASE("fingerprints") {
  CHECK(sample().fingerprint() == sample().fingerprint());
  CHECK(sample().fingerprint().size() == 16);
  ProbeReport other = sample();
  other.setInput("rho", 2);
  CHECK(other.fingerprint() != sample().fingerprint());
  // Insertion order does not matter.
  CHECK(fingerprintOf({{"a", "1"}, {"b", "2"}}) == fingerprintOf({{"b", "2"}, {"a", "1"}}));
}

TEST_CASE("pass logic") {
  ProbeReport empty("e", "c");
  CHECK_FALSE(empty.passed());
  ProbeReport r = sample();
  CHECK(r.passed());
  r.raise(ProbeFlag::Unconverged);
  CHECK_FALSE(r.passed());
  r.setPass("later", true);
  CHECK_FALSE(r.passFlags().at("later"));
  ProbeReport f = sample();
  f.setPass("other", false);
  CHECK_FALSE(f.passed());
}

TEST_CASE("JSON is deterministic and excludes runtime") {
  ProbeReport a = sample(), b = sample();
  a.setRuntime(1);
  b.setRuntime(2);
  CHECK(a.toJson() == b.toJson());
  const auto j = nlohmann::json::parse(a.toJson());
  CHECK(j.dump().find("runtime") == std::string::npos);
  CHECK(a.statistic("value") == 0.25);
}

TEST_CASE("number formatting") {
  for (double v : {0.1, 1.0 / 3, 1e-300, 123456789.0, -2.5}) {
    CHECK(std::stod(formatDouble(v)) == v);
  }
  CHECK(formatDouble(0.1) == "0.1");
}

TEST_CASE("CSV tables") {
  const Table t{"the claim", {"x", "y"}, {{1, 0.5}}};
  const std::string csv = tableToCsv(t, "abc");
  CHECK(csv.rfind("#", 0) == 0);
  CHECK(csv.find("the claim") != std::string::npos);
  CHECK(csv.find("\nx,y\n1,0.5\n") != std::string::npos);
}

TEST_CASE("report files") {
  const auto dir = std::filesystem::temp_directory_path() / "oulab_report_test";
  std::filesystem::remove_all(dir);
  const auto paths = writeReport(sample(), dir.string());
  CHECK(paths.size() == 2);
  CHECK(std::filesystem::exists(dir / "probe.json"));
  CHECK(std::filesystem::exists(dir / "curve.csv"));
  CHECK(slurp(dir / "probe.json") == sample().toJson());
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    CHECK(e.path().extension() != ".tmp");
  }
  writeFileAtomic((dir / "x.txt").string(), "hello");
  CHECK(slurp(dir / "x.txt") == "hello");
  std::filesystem::remove_all(dir);
}

}
