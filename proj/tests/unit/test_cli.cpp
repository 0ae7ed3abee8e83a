#include "nanowb/lattice.hpp"
#include "nanowb/runner.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

using namespace nanowb;

namespace {

struct Exec {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr discarded and returns its exit code and stdout.
Exec cli(const std::string& args) {
  const std::string cmd = std::string("\"") + NANOWB_CLI_PATH + "\" " + args + " 2>/dev/null";
  Exec r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string scene(const std::string& name) { return std::string("\"") + NANOWB_SCENES_DIR + "/" + name + "\""; }

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("cli: scene validate") {
  const auto good = cli("scene validate " + scene("mesovolume.json"));
  CHECK(good.code == 0);
  CHECK(good.out.find("valid meso-simulation scene") == 0);
  CHECK(cli("scene validate " + scene("composite.json")).code == 0);
  CHECK(cli("scene validate " + scene("invalid.json")).code == 1);
  CHECK(cli("scene validate /nonexistent.json").code == 2);
  const auto printed = cli("scene validate --print " + scene("small_meso.json"));
  CHECK(printed.code == 0);
  CHECK(printed.out.find("\"relax_iters\": 5") != std::string::npos);
}

TEST_CASE("cli: usage errors exit 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("scene validate").code == 1);
  CHECK(cli("lattice build " + scene("fcc.json") + " --bogus").code == 1);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("cli: lattice build writes an xyz file") {
  testing::TempDir tmp("cli");
  const fs::path out = tmp.path() / "m.xyz";
  const auto r = cli("lattice build " + scene("fcc.json") + " -o " + quoted(out));
  CHECK(r.code == 0);
  CHECK(r.out == out.string() + "\n");
  const auto text = lines(read_file(out));
  REQUIRE(text.size() == 110);
  CHECK(text[0] == "108");

  const fs::path ball = tmp.path() / "c60.xyz";
  CHECK(cli("lattice build " + scene("fullerene.json") + " -o " + quoted(ball)).code == 0);
  CHECK(read_xyz(ball.string()).size() == 60);
}

TEST_CASE("cli: composite assemble") {
  testing::TempDir tmp("cli");
  const fs::path out = tmp.path() / "composite.xyz";
  const auto r = cli("composite assemble " + scene("composite.json") + " -o " + quoted(out));
  REQUIRE(r.code == 0);
  const auto atoms = read_xyz(out.string());
  std::size_t carbon = 0;
  for (const auto& a : atoms) carbon += a.species == "C" ? 1 : 0;
  CHECK(carbon > 0);
  CHECK(carbon % 2 == 0);
  CHECK(atoms.size() - carbon < 12 * 12 * 8 * 4);
  CHECK(cli("composite assemble " + scene("mesovolume.json") + " -o " + quoted(out)).code == 1);
}

TEST_CASE("cli: meso gen") {
  testing::TempDir tmp("cli");
  const fs::path csv = tmp.path() / "grains.csv", png = tmp.path() / "yield.png";
  const auto r = cli("meso gen " + scene("small_meso.json") + " -o " + quoted(csv) + " --png " + quoted(png));
  CHECK(r.code == 0);
  CHECK(lines(r.out) == std::vector<std::string>{csv.string(), png.string()});
  const auto f = read_field_csv(csv.string());
  CHECK(f.nx == 40);
  CHECK(*std::max_element(f.values.begin(), f.values.end()) == 7.0);
  CHECK(fs::file_size(png) > 0);
}

TEST_CASE("cli: sim run then post bands and plot") {
  testing::TempDir tmp("cli");
  const fs::path scene_path = tmp.path() / "tiny.json";
  std::ofstream(scene_path) << R"({
    "scene_version": 1,
    "kind": "meso-simulation",
    "materials": [{"name": "al", "rho0": 2.7, "K": 70, "G": 26, "sigma_y": 0.1}],
    "meso": {"material": "al", "grid": {"nx": 12, "ny": 12, "width": 2.4, "height": 2.4},
             "grains": {"count": 4}, "schedule": {"load": {"target_strain": 0.01, "ramp_transits": 5, "hold_transits": 1},
             "frames": 2}}
  })";
  const fs::path runs = tmp.path() / "runs";
  const auto r = cli("sim run -q " + quoted(scene_path) + " -o " + quoted(runs));
  REQUIRE(r.code == 0);
  const auto printed = lines(r.out);
  REQUIRE(printed.size() > 3);
  const fs::path dir = printed[0];
  CHECK(dir.parent_path() == runs);
  for (const auto& p : printed) CHECK_MESSAGE(fs::exists(p), p);
  CHECK(read_manifest(dir)["status"] == "done");

  const auto bands = cli("post bands " + quoted(dir));
  CHECK(bands.code == 0);
  CHECK(bands.out.find("band") != std::string::npos);
  const auto bj = cli("post bands --json " + quoted(dir));
  CHECK(bj.code == 0);
  CHECK(Json::parse(bj.out)["field"] == "eq_plastic");

  const fs::path png = tmp.path() / "eq.png";
  CHECK(cli("post plot " + quoted(dir) + " --field eq_plastic -o " + quoted(png)).code == 0);
  CHECK(fs::file_size(png) > 0);
  CHECK(cli("post plot " + quoted(dir) + " --field nothing -o " + quoted(png)).code == 1);
  CHECK(cli("post bands " + quoted(tmp.path())).code == 2);
}
