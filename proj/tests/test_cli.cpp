#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "frameflow/csv.hpp"
#include "frameflow/noise.hpp"

namespace fs = std::filesystem;
using namespace frameflow;

namespace {

struct Run {
  int code;
  std::string out, err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("frameflow_cli_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args, const std::string& env = "") {
  const fs::path o = scratch() / "stdout", e = scratch() / "stderr";
  const std::string cmd = env + " '" + std::string(FRAMEFLOW_CLI) + "' " + args + " >'" +
                          o.string() + "' 2>'" + e.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<std::vector<double>> rows(const std::string& text) {
  std::istringstream in(text);
  return csv::read_numeric(in).rows;
}

// Value after "# key=" in a CSV trailer.
double trailer(const std::string& text, const std::string& key) {
  const auto at = text.find("# " + key + "=");
  REQUIRE(at != std::string::npos);
  return std::stod(text.substr(at + key.size() + 3));
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run("--help").code == 0);
  CHECK(run("simulate --help").code == 0);
  CHECK(run("").code != 0);
  CHECK(run("bogus").code == 2);
  CHECK(run("simulate --problem flat").code == 2);
}

TEST_CASE("unknown names exit 2 and list the valid ones") {
  const Run s = run("simulate --problem flat --scheme rk9");
  CHECK(s.code == 2);
  CHECK(s.err.find("cmt") != std::string::npos);
  const Run p = run("simulate --problem torus --scheme em");
  CHECK(p.code == 2);
  CHECK(p.err.find("noncomm2d") != std::string::npos);
}

TEST_CASE("simulate on the flat preset reproduces x0 + A_0 t + B_t") {
  const Run r = run("simulate --problem flat --scheme frame-milstein --h 0.25 --t 1 --paths 2 "
                    "--seed 5");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("path,step,t,x1,x2,e11,e12,e21,e22\n", 0) == 0);
  const auto table = rows(r.out);
  REQUIRE(table.size() == 10);
  for (std::size_t p = 0; p < 2; ++p) {
    const auto incr = sample_increments(5, p, TimeGrid(0.0, 1.0, 4), 2, 64);
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    for (std::size_t k = 0; k < 4; ++k) {
      b += incr.dw(k);
      const auto& row = table[p * 5 + k + 1];
      const double t = 0.25 * (k + 1);
      CHECK(row[2] == doctest::Approx(t));
      CHECK(std::abs(row[3] - (0.3 * t + b(0))) < 1e-12);
      CHECK(std::abs(row[4] - (-0.2 * t + b(1))) < 1e-12);
      CHECK(row[5] == 1.0);
      CHECK(row[6] == 0.0);
    }
  }
}

TEST_CASE("output is byte-identical for a fixed seed and independent of threads") {
  const Run a = run("simulate --problem noncomm2d --scheme cg05 --h 0.125 --paths 3 --seed 9");
  const Run b = run("simulate --problem noncomm2d --scheme cg05 --h 0.125 --paths 3 --seed 9");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != run("simulate --problem noncomm2d --scheme cg05 --h 0.125 --paths 3 --seed 10").out);

  const std::string conv =
      "convergence --problem noncomm2d --scheme cmt --ladder 2:4 --paths 30 --ref-exp 6 "
      "--ref-substeps 4";
  const Run c1 = run(conv + " --threads 1");
  const Run c2 = run(conv + " --threads 2");
  const Run c3 = run(conv, "FRAMEFLOW_THREADS=3");
  REQUIRE(c1.code == 0);
  CHECK(c1.out == c2.out);
  CHECK(c1.out == c3.out);
}

TEST_CASE("--out writes the file instead of stdout") {
  const fs::path file = scratch() / "sim.csv";
  const Run r = run("simulate --problem gbm1d --scheme ac --h 0.5 --out '" + file.string() + "'");
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  CHECK(slurp(file).rfind("path,step,t,x1\n", 0) == 0);
  const Run bad = run("simulate --problem gbm1d --scheme ac --h 0.5 --out /nonexistent/dir/x.csv");
  CHECK(bad.code == 1);
}

TEST_CASE("step sizes must divide T") {
  CHECK(run("simulate --problem flat --scheme em --h 0.3").code == 2);
}

TEST_CASE("convergence rejects short ladders and bad modes") {
  const Run r = run("convergence --problem noncomm2d --scheme cmt --ladder 4:5");
  CHECK(r.code == 2);
  CHECK(r.err.find("need ≥ 3 ladder points") != std::string::npos);
  CHECK(run("convergence --problem noncomm2d --scheme cmt --ladder 4:x").code == 2);
  CHECK(run("convergence --problem noncomm2d --scheme cmt --ladder 2:4 --mode fuzzy").code == 2);
  CHECK(run("convergence --problem noncomm2d --ladder 2:4").code == 2);
  CHECK(run("convergence --problem noncomm2d --scheme cmt --ladder 2:8 --ref-exp 6").code == 2);
  CHECK(run("convergence --problem noncomm2d --scheme em --mode weak --ladder 2:4").code == 2);
}

TEST_CASE("convergence reports a fitted slope for each mode") {
  const Run s = run("convergence --problem noncomm2d --scheme em --ladder 3:6 --paths 100 "
                    "--ref-exp 9 --ref-substeps 8");
  REQUIRE(s.code == 0);
  CHECK(s.out.rfind("h,error,stderr\n", 0) == 0);
  CHECK(rows(s.out).size() == 4);
  const double slope = trailer(s.out, "slope");
  CHECK(slope > 0.3);
  CHECK(slope < 0.7);
  CHECK(s.out.find("kind=strong-coupled") != std::string::npos);

  const Run w2 = run("convergence --problem noncomm2d --scheme em --mode w2 --ladder 3:6 "
                     "--paths 100 --ref-exp 9 --ref-substeps 8");
  REQUIRE(w2.code == 0);
  CHECK(w2.out.find("kind=wasserstein2") != std::string::npos);

  const Run weak = run("convergence --problem gbm1d --scheme ac --mode weak --ladder 1:4 "
                       "--paths 20000");
  REQUIRE(weak.code == 0);
  const double ws = trailer(weak.out, "slope");
  CHECK(ws > 1.7);
  CHECK(ws < 2.3);
}

TEST_CASE("cmt order through the command line") {
  const std::string common = " --ladder 4:9 --paths 200 --ref-exp 12 --ref-substeps 256";
  const Run cmt = run("convergence --problem noncomm2d --scheme cmt" + common);
  REQUIRE(cmt.code == 0);
  const double sc = trailer(cmt.out, "slope");
  CHECK(sc > 0.8);
  CHECK(sc < 1.2);
}

TEST_CASE("sphere subcommand") {
  const fs::path traj = scratch() / "traj.csv";
  const Run r = run("sphere --t 1 --h 0.00390625 --paths 100000 --trajectory '" + traj.string() +
                    "'");
  REQUIRE(r.code == 0);
  const auto table = rows(r.out);
  REQUIRE(table.size() == 1);
  const double mean = table[0][1], se = table[0][2], expected = table[0][3];
  CHECK(expected == doctest::Approx(std::exp(-1.0)));
  CHECK(std::abs(mean - expected) < 3.0 * se);
  CHECK(trailer(r.out, "max_norm_deviation") < 1e-12);
  const auto path = rows(slurp(traj));
  REQUIRE(path.size() == 257);
  CHECK(path[0][3] == 1.0);
  for (const auto& row : path)
    CHECK(std::abs(std::hypot(row[1], row[2], row[3]) - 1.0) < 1e-12);
  CHECK(run("sphere --h 0.3").code == 2);
  CHECK(run("sphere --paths 0").code == 2);
}

TEST_CASE("develop subcommand") {
  const fs::path line = scratch() / "line.csv";
  write_file(line, "t,q1,q2\n0,0,0\n1," + csv::num(std::numbers::pi / 2) + ",0\n");
  const Run r = run("develop --curve '" + line.string() + "'");
  REQUIRE(r.code == 0);
  const auto pts = rows(r.out);
  REQUIRE(pts.size() == 2);
  CHECK(std::abs(pts[1][1] - 1.0) < 1e-6);
  CHECK(std::abs(pts[1][2]) < 1e-6);
  CHECK(std::abs(pts[1][3]) < 1e-6);
  CHECK(trailer(r.out, "max_constraint_residual") < 1e-6);
  CHECK(r.out.find("# final_frame=") != std::string::npos);

  const fs::path still = scratch() / "still.csv";
  write_file(still, "t,q1,q2\n0,0.2,0.1\n1,0.2,0.1\n2,0.2,0.1\n");
  const Run s = run("develop --curve '" + still.string() + "'");
  REQUIRE(s.code == 0);
  for (const auto& row : rows(s.out)) {
    CHECK(std::abs(row[1]) < 1e-15);
    CHECK(std::abs(row[3] - 1.0) < 1e-15);
  }

  const fs::path bad = scratch() / "bad.csv";
  write_file(bad, "t,q1,q2\n0,0,0\n1,abc,0\n");
  const Run b = run("develop --curve '" + bad.string() + "'");
  CHECK(b.code == 2);
  CHECK(b.err.find("line 3") != std::string::npos);
  CHECK(run("develop --curve '" + line.string() + "' --surface torus").code == 2);
  CHECK(run("develop --curve /nonexistent.csv").code == 2);
}

TEST_CASE("selftest passes") {
  const Run r = run("selftest");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("check,passed,value,tolerance\n", 0) == 0);
  CHECK(r.out.find(",no,") == std::string::npos);
}
