#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "clouddict/cloud_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / ("clouddict_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  Run run(const std::string& args) const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = std::string(CLOUDDICT_CLI) + " " + args + " >" + out + " 2>" + err;
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const std::string& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

 private:
  fs::path dir_;
};

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("synth writes the requested number of points") {
  Workspace ws;
  auto r = ws.run("synth --shape sphere --n 123 --seed 4 --out " + ws.path("s.xyz"));
  REQUIRE(r.status == 0);
  CHECK(r.out == "points 123\n");
  CHECK(count_lines(Workspace::slurp(ws.path("s.xyz"))) == 123);

  r = ws.run("synth --shape plane --n 50 --out " + ws.path("p.ply"));
  REQUIRE(r.status == 0);
  CHECK(clouddict::read_cloud(ws.path("p.ply")).size() == 50);

  CHECK(ws.run("synth --shape torus --n 10 --out " + ws.path("t.xyz")).status != 0);
  CHECK(ws.run("synth --shape plane --n 0 --out " + ws.path("t.xyz")).status != 0);
  CHECK(ws.run("synth --shape plane --out " + ws.path("t.xyz")).status != 0);
  CHECK(ws.run("").status != 0);
}

TEST_CASE("reruns are byte-identical") {
  Workspace ws;
  REQUIRE(ws.run("synth --shape saddle --n 500 --seed 9 --out " + ws.path("a.xyz")).status == 0);
  REQUIRE(ws.run("synth --shape saddle --n 500 --seed 9 --out " + ws.path("b.xyz")).status == 0);
  CHECK(Workspace::slurp(ws.path("a.xyz")) == Workspace::slurp(ws.path("b.xyz")));
  REQUIRE(ws.run("noise --in " + ws.path("a.xyz") + " --sigma 0.01 --seed 2 --out " + ws.path("na.xyz")).status == 0);
  REQUIRE(ws.run("noise --in " + ws.path("a.xyz") + " --sigma 0.01 --seed 2 --out " + ws.path("nb.xyz")).status == 0);
  CHECK(Workspace::slurp(ws.path("na.xyz")) == Workspace::slurp(ws.path("nb.xyz")));
  CHECK(Workspace::slurp(ws.path("na.xyz")) != Workspace::slurp(ws.path("a.xyz")));
}

TEST_CASE("noise with zero sigma copies the cloud") {
  Workspace ws;
  REQUIRE(ws.run("synth --shape sphere --n 200 --seed 1 --out " + ws.path("a.xyz")).status == 0);
  REQUIRE(ws.run("noise --in " + ws.path("a.xyz") + " --sigma 0 --out " + ws.path("b.xyz")).status == 0);
  CHECK(Workspace::slurp(ws.path("a.xyz")) == Workspace::slurp(ws.path("b.xyz")));
  CHECK(ws.run("noise --in " + ws.path("a.xyz") + " --sigma -1 --out " + ws.path("b.xyz")).status != 0);
  CHECK(ws.run("noise --in " + ws.path("missing.xyz") + " --sigma 0 --out " + ws.path("b.xyz")).status != 0);
}

TEST_CASE("malformed input clouds fail with a message") {
  Workspace ws;
  ws.write("bad.xyz", "0 0 0\n1 2\n");
  const auto r = ws.run("noise --in " + ws.path("bad.xyz") + " --sigma 0 --out " + ws.path("o.xyz"));
  CHECK(r.status == 1);
  CHECK(r.err.find("line 2") != std::string::npos);
}

TEST_CASE("learn writes a dictionary and a trace") {
  Workspace ws;
  REQUIRE(ws.run("synth --shape saddle --n 800 --seed 3 --out " + ws.path("c.xyz")).status == 0);
  const std::string base = "learn --in " + ws.path("c.xyz") + " --out " + ws.path("d.cdict") + " --trace " +
                           ws.path("t.csv") + " --radius 0.3 --n-atoms 8 --max-freq-u 3 --max-freq-v 3 --sparsity-L 2";
  auto r = ws.run(base + " --outer-iters 1");
  REQUIRE(r.status == 0);
  const auto trace = Workspace::slurp(ws.path("t.csv"));
  CHECK(count_lines(trace) == 2);
  CHECK(trace.rfind("iteration,error\n0,", 0) == 0);
  CHECK(Workspace::slurp(ws.path("d.cdict")).rfind("CDICT v1\nbasis cos 3 3\natoms 8\n", 0) == 0);

  REQUIRE(ws.run(base + " --outer-iters 5 --seed 7 --threads 1").status == 0);
  const auto t1 = Workspace::slurp(ws.path("t.csv"));
  const auto d1 = Workspace::slurp(ws.path("d.cdict"));
  REQUIRE(ws.run(base + " --outer-iters 5 --seed 7 --threads 3").status == 0);
  CHECK(Workspace::slurp(ws.path("t.csv")) == t1);
  CHECK(Workspace::slurp(ws.path("d.cdict")) == d1);
  CHECK(count_lines(t1) == 6);

  CHECK(ws.run(base + " --outer-iters 0").status != 0);
  CHECK(ws.run(base + " --init bogus").status != 0);
}

TEST_CASE("learn on a cloud too small for any patch fails") {
  Workspace ws;
  ws.write("tiny.xyz", "0 0 0\n1 0 0\n");
  const auto r = ws.run("learn --in " + ws.path("tiny.xyz") + " --out " + ws.path("d.cdict") + " --trace " +
                        ws.path("t.csv") + " --radius 0.5");
  CHECK(r.status != 0);
  CHECK(r.err.find("no usable training patches") != std::string::npos);
  CHECK_FALSE(fs::exists(ws.path("d.cdict")));
}

TEST_CASE("denoise on a noiseless plane is a fixed point") {
  Workspace ws;
  REQUIRE(ws.run("synth --shape plane --n 1500 --seed 5 --out " + ws.path("p.xyz")).status == 0);
  const auto r = ws.run("denoise --in " + ws.path("p.xyz") + " --out " + ws.path("o.xyz") + " --report " +
                        ws.path("r.txt") + " --radius 0.25 --solver omp --threads 2");
  REQUIRE(r.status == 0);
  CHECK(r.out == Workspace::slurp(ws.path("r.txt")));
  CHECK(r.out.find("n_uncovered 0\n") != std::string::npos);
  const auto in = clouddict::read_cloud(ws.path("p.xyz"));
  const auto out = clouddict::read_cloud(ws.path("o.xyz"));
  REQUIRE(in.size() == out.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) worst = std::max(worst, (in.points[i] - out.points[i]).norm());
  CHECK(worst <= 1e-8);
}

TEST_CASE("denoise with a learned dictionary and dictionary errors") {
  Workspace ws;
  REQUIRE(ws.run("synth --shape sphere --n 1000 --seed 2 --out " + ws.path("c.xyz")).status == 0);
  REQUIRE(ws.run("learn --in " + ws.path("c.xyz") + " --out " + ws.path("d.cdict") + " --trace " + ws.path("t.csv") +
                 " --radius 0.3 --n-atoms 6 --max-freq-u 2 --max-freq-v 2 --sparsity-L 2 --outer-iters 3")
              .status == 0);
  const std::string denoise = "denoise --in " + ws.path("c.xyz") + " --out " + ws.path("o.xyz") + " --radius 0.3 ";
  CHECK(ws.run(denoise + "--dict " + ws.path("d.cdict") + " --sparsity-L 2 --solver omp").status == 0);
  CHECK(ws.run(denoise + "--dict " + ws.path("d.cdict") + " --max-freq-u 3").status != 0);

  ws.write("bad.cdict", "CDICT v2\nbasis cos 1 1\natoms 1\n1\n0\n0\n0\n");
  auto r = ws.run(denoise + "--dict " + ws.path("bad.cdict"));
  CHECK(r.status == 1);
  CHECK(r.err.find("line 1") != std::string::npos);
  ws.write("short.cdict", "CDICT v1\nbasis cos 1 1\natoms 1\n1\n0\n");
  r = ws.run(denoise + "--dict " + ws.path("short.cdict"));
  CHECK(r.status == 1);
  CHECK(r.err.find("line 6") != std::string::npos);
  CHECK(ws.run(denoise + "--dict " + ws.path("missing.cdict")).status != 0);
  CHECK(ws.run(denoise + "--solver relaxed --lambda 0").status == 2);
}

TEST_CASE("eval prints chamfer and rmse") {
  Workspace ws;
  ws.write("a.xyz", "0 0 0\n");
  ws.write("b.xyz", "1 0 0\n");
  auto r = ws.run("eval --a " + ws.path("a.xyz") + " --b " + ws.path("a.xyz"));
  REQUIRE(r.status == 0);
  CHECK(r.out == "chamfer 0\n");
  r = ws.run("eval --a " + ws.path("a.xyz") + " --b " + ws.path("b.xyz") + " --shape plane");
  REQUIRE(r.status == 0);
  CHECK(r.out == "chamfer 1\nrmse 0\n");
  CHECK(ws.run("eval --a " + ws.path("a.xyz")).status != 0);
  ws.write("empty.xyz", "");
  CHECK(ws.run("eval --a " + ws.path("empty.xyz") + " --shape plane").status != 0);
}
