/*
 * Copyright 2026 The delay_lqr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "delay_lqr/cli/cli.hpp"
#include "delay_lqr/errors.hpp"
#include "delay_lqr/cli/config.hpp"
#include "delay_lqr/cli/report.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace delay_lqr;
using namespace delay_lqr::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
  json report() const { return json::parse(out); }
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "delay_lqr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("delay_lqr_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const json& doc) const {
    std::ofstream(file(name)) << doc.dump(2);
    return file(name);
  }

 private:
  fs::path path_;
};

json fixture_json(const std::string& name) {
  std::ifstream f(fixture_path(name));
  return json::parse(f);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// Every number in `a` equals the one at the same place in `b`.
void check_same_numbers(const json& a, const json& b) {
  if (a.is_object()) {
    for (const auto& item : a.items()) {
      REQUIRE(b.contains(item.key()));
      check_same_numbers(item.value(), b.at(item.key()));
    }
  } else if (a.is_array()) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) check_same_numbers(a[i], b[i]);
  } else if (a.is_number()) {
    CHECK(a.get<double>() == b.get<double>());
  } else {
    CHECK(a == b);
  }
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("solve on the finite single-constraint fixture") {
    const Outcome o = run_cli({"solve", "--config", fixture_path("ex_a.json"), "--no-timestamp"});
    REQUIRE(o.code == cli::kExitOptimal);
    const json r = o.report();
    CHECK(r["status"] == "Optimal");
    CHECK(r["mode"] == "solve");
    CHECK(std::abs(r["lambda_star"][0].get<double>() - 2.2313) < 1e-3);
    CHECK(std::abs(r["dual_value"].get<double>() - 22.30) < 0.01);
    CHECK(r["gains"]["K"].size() == 2);
    CHECK(r["kkt"]["max_scaled"].get<double>() < 1e-4);
    CHECK_FALSE(r.contains("generated_at"));
    CHECK(r["problem"]["horizon"]["finite"] == 2);
  }

  TEST_CASE("exit codes") {
    CHECK(run_cli({"solve", "--config", fixture_path("ex_a_c1320.json")}).code == cli::kExitInfeasible);
    CHECK(run_cli({"solve", "--config", fixture_path("ex_a.json"), "--max-iter", "10"}).code ==
          cli::kExitIterationLimit);

    const Outcome missing = run_cli({"solve", "--config", "/nonexistent/config.json"});
    CHECK(missing.code == cli::kExitConfigError);
    CHECK(missing.err.rfind("delay_lqr: error: ", 0) == 0);
    CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

    CHECK(run_cli({"solve"}).code == cli::kExitConfigError);
    CHECK(run_cli({"bogus", "--config", fixture_path("ex_a.json")}).code == cli::kExitConfigError);

    TempDir tmp;
    json bad = fixture_json("ex_b.json");
    bad["system"]["B"] = 0.0;
    bad["system"]["B_bar"] = 0.0;
    CHECK(run_cli({"solve", "--config", tmp.write("unstab.json", bad)}).code == cli::kExitNotStabilizable);
  }

  TEST_CASE("invalid configurations") {
    TempDir tmp;
    json doc = fixture_json("ex_a.json");
    SUBCASE("unknown key") { doc["system"]["gamma"] = 1.0; }
    SUBCASE("weight not positive definite") { doc["objective"]["Q"] = 0.0; }
    SUBCASE("ragged matrix") { doc["system"]["A"] = json::array({json::array({1.0, 2.0}), json::array({1.0})}); }
    SUBCASE("bad horizon") { doc["horizon"] = "forever"; }
    SUBCASE("negative multiplier") { doc["ascent"]["lambda0"] = json::array({-1.0}); }
    SUBCASE("unknown noise") { doc["simulation"] = {{"noise", "uniform"}}; }
    const Outcome o = run_cli({"solve", "--config", tmp.write("bad.json", doc)});
    CHECK(o.code == cli::kExitConfigError);
    CHECK(o.err.find("delay_lqr: error:") != std::string::npos);
    CHECK(o.out.empty());
  }

  TEST_CASE("reports are byte-identical without timestamps") {
    const std::vector<std::string> solve = {"solve", "--config", fixture_path("ex_a_c1330.json"), "--no-timestamp"};
    CHECK(run_cli(solve).out == run_cli(solve).out);
    const std::vector<std::string> sim = {"simulate", "--config", fixture_path("ex_b.json"), "--trials", "2000",
                                          "--steps", "100", "--seed", "3", "--no-timestamp"};
    const Outcome a = run_cli(sim);
    REQUIRE(a.code == 0);
    CHECK(a.out == run_cli(sim).out);
    std::vector<std::string> threaded = sim;
    threaded.insert(threaded.end(), {"--threads", "4"});
    json ra = a.report(), rb = run_cli(threaded).report();
    ra.erase("simulation");
    rb.erase("simulation");
    CHECK(cli::dump_report(ra) == cli::dump_report(rb));

    const Outcome stamped = run_cli({"solve", "--config", fixture_path("ex_a_c1330.json")});
    CHECK(stamped.report().contains("generated_at"));
    CHECK(stamped.report().contains("timing"));
  }

  TEST_CASE("report round-trips through its text form") {
    const Outcome o = run_cli({"evaluate", "--config", fixture_path("ex_b_two.json"), "--no-timestamp"});
    REQUIRE(o.code == 0);
    const json r = o.report();
    check_same_numbers(r, json::parse(cli::dump_report(r)));
    check_same_numbers(r, json::parse(cli::dump_report(r, -1)));
    CHECK(o.out == cli::dump_report(r));
  }

  TEST_CASE("17 significant digits and null for non-finite numbers") {
    const json doc = {{"third", 1.0 / 3.0}, {"inf", INFINITY}, {"rows", {0.1, 0.2}}};
    const std::string text = cli::dump_report(doc);
    CHECK(text.find("0.33333333333333331") != std::string::npos);
    CHECK(text.find("\"inf\": null") != std::string::npos);
    CHECK(text.find("[0.10000000000000001, 0.20000000000000001]") != std::string::npos);
  }

  TEST_CASE("evaluate and simulate at a fixed multiplier") {
    TempDir tmp;
    json doc = fixture_json("ex_b.json");
    doc["lambda"] = json::array({0.6058});
    const std::string path = tmp.write("fixed.json", doc);
    const Outcome e = run_cli({"evaluate", "--config", path, "--no-timestamp"});
    REQUIRE(e.code == 0);
    const json r = e.report();
    CHECK(r["status"] == "Evaluated");
    CHECK(std::abs(r["gains"]["K"][0][0][0].get<double>() - 2.650791705) < 1e-5);
    CHECK(std::abs(r["riccati"]["Z"][0][0].get<double>() - 46.779) < 1e-2);

    const Outcome s = run_cli({"simulate", "--config", path, "--trials", "20000", "--seed", "4", "--no-timestamp"});
    REQUIRE(s.code == 0);
    const json mc = s.report()["monte_carlo"];
    CHECK(mc["trials"] == 20000);
    CHECK(mc["noise"] == "gaussian");
    CHECK(mc["covered_3se"][0] == true);
    CHECK(mc["covered_3se"][1] == true);
  }

  TEST_CASE("trace and plot files") {
    TempDir tmp;
    const std::string csv = tmp.file("trace.csv");
    const std::string plot = tmp.file("plot.csv");
    const Outcome o = run_cli({"verify", "--config", fixture_path("ex_a.json"), "--trials", "5000", "--csv-trace", csv,
                               "--plot-data", plot, "--no-timestamp"});
    REQUIRE(o.code == 0);
    const std::string trace = read_file(csv);
    CHECK(trace.rfind("n,lambda_1,gradient_1,dual_value\n0,0,", 0) == 0);
    const std::string curve = read_file(plot);
    CHECK(curve.rfind("k,exact_mean_square,empirical_mean_square\n0,1,1\n", 0) == 0);
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);
    CHECK(o.report()["monte_carlo"]["covered_3se"].size() == 2);
  }

  TEST_CASE("certify") {
    const Outcome ok = run_cli({"certify", "--config", fixture_path("ex_b.json"), "--no-timestamp"});
    CHECK(ok.code == 0);
    CHECK(ok.report()["stable"] == true);

    TempDir tmp;
    json doc = fixture_json("ex_b.json");
    doc["gain"] = json::array({json::array({0.0})});
    const Outcome bad = run_cli({"certify", "--config", tmp.write("open.json", doc), "--no-timestamp"});
    CHECK(bad.code == cli::kExitNotStabilizable);
    CHECK(std::abs(bad.report()["spectral_radius"].get<double>() - 1.70) < 1e-9);

    CHECK(run_cli({"certify", "--config", fixture_path("ex_a.json")}).code == cli::kExitConfigError);
  }

  TEST_CASE("command-line overrides") {
    const Outcome o = run_cli({"solve", "--config", fixture_path("ex_a.json"), "--alpha", "0.02", "--tol", "1e-8",
                               "--no-timestamp"});
    REQUIRE(o.code == 0);
    const json r = o.report();
    CHECK(std::abs(r["lambda_star"][0].get<double>() - 2.2313) < 1e-3);
    const int fewer = r["iterations"].get<int>();
    const int baseline = run_cli({"solve", "--config", fixture_path("ex_a.json"), "--no-timestamp"})
                             .report()["iterations"]
                             .get<int>();
    CHECK(fewer < baseline);
  }

  TEST_CASE("config parsing helpers") {
    const MatrixXd one = cli::parse_matrix(json(2.5), "x");
    CHECK(one.rows() == 1);
    CHECK(one(0, 0) == 2.5);
    const MatrixXd m = cli::parse_matrix(json::array({json::array({1, 2}), json::array({3, 4})}), "m");
    CHECK(m(1, 0) == 3.0);
    CHECK_THROWS_AS(cli::parse_matrix(json("text"), "m"), InvalidInput);
    CHECK(cli::parse_vector(json::array({1, 2, 3}), "v").size() == 3);

    for (const char* name : {"ex_a_two.json", "ex_b_two.json"}) {
      const cli::RunConfig cfg = load_fixture(name);
      json doc = cli::problem_to_json(cfg.problem);
      const cli::RunConfig again = cli::parse_config(doc);
      CHECK(again.problem.model.A == cfg.problem.model.A);
      CHECK(again.problem.bounds() == cfg.problem.bounds());
      CHECK(again.problem.is_finite() == cfg.problem.is_finite());
    }
  }
}
