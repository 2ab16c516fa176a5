#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

// Drives the installed binary end to end through a shell. Everything tiny:
// 16px corpus images, one-epoch training runs, single-digit iteration counts.

namespace {

namespace fs = std::filesystem;

const std::string kBin = SRFT_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

int run_env(const std::string& env, const std::string& args) {
  const std::string cmd = env + " " + kBin + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

const fs::path& scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "srft_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// 2-image 16px corpus, generated once.
const fs::path& corpus() {
  static const fs::path dir = [] {
    fs::path d = scratch() / "corpus";
    REQUIRE(run("gen-corpus --out " + d.string() + " --count 2 --size 16") == 0);
    return d;
  }();
  return dir;
}

// x2 model pretrained for one epoch, built once.
const fs::path& tiny_model() {
  static const fs::path p = [] {
    fs::path m = scratch() / "tiny.srft";
    REQUIRE(run("pretrain --corpus " + corpus().string() + " --out " + m.string() +
                " --scale 2 --blocks 1 --width 8 --patch 8 --pairs 8 --epochs 1 --batch 4") == 0);
    return m;
  }();
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1, help with 0") {
  CHECK(run("") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("no-such-command") == 1);
  CHECK(run("surgery --in a --out b --to-scale 5") == 1);   // out of range
  CHECK(run("degrade --in x.ppm") == 1);                    // missing required flags
}

TEST_CASE("data errors exit with 2") {
  CHECK(run("finetune --model " + (scratch() / "missing.srft").string() + " --in " +
            (scratch() / "missing.ppm").string()) == 2);
  CHECK(run("degrade --in " + (scratch() / "missing.ppm").string() + " --out " +
            (scratch() / "x.ppm").string() + " --scale 2") == 2);
}

TEST_CASE("corpus generation is seeded and reproducible") {
  fs::path a = scratch() / "corpus_a";
  fs::path b = scratch() / "corpus_b";
  fs::path c = scratch() / "corpus_c";
  CHECK(run("--seed 5 gen-corpus --out " + a.string() + " --count 2 --size 16") == 0);
  CHECK(run("--seed 5 gen-corpus --out " + b.string() + " --count 2 --size 16") == 0);
  CHECK(run("--seed 6 gen-corpus --out " + c.string() + " --count 2 --size 16") == 0);
  REQUIRE(fs::exists(a / "img_000.ppm"));
  REQUIRE(fs::exists(a / "img_001.ppm"));
  CHECK(slurp(a / "img_000.ppm") == slurp(b / "img_000.ppm"));
  CHECK(slurp(a / "img_001.ppm") == slurp(b / "img_001.ppm"));
  CHECK(slurp(a / "img_000.ppm") != slurp(c / "img_000.ppm"));
}

TEST_CASE("the seed environment variable matches the flag") {
  fs::path a = scratch() / "corpus_env";
  fs::path b = scratch() / "corpus_flag";
  CHECK(run_env("SRFT_SEED=11", "gen-corpus --out " + a.string() + " --count 1 --size 16") == 0);
  CHECK(run("--seed 11 gen-corpus --out " + b.string() + " --count 1 --size 16") == 0);
  CHECK(slurp(a / "img_000.ppm") == slurp(b / "img_000.ppm"));
}

TEST_CASE("degrade rejects contradictory kernel flags after reading its input") {
  const fs::path in = corpus() / "img_000.ppm";
  const fs::path out = scratch() / "lr_conflict.ppm";
  CHECK(run("degrade --in " + in.string() + " --out " + out.string() +
            " --scale 2 --kernel nope.txt --random-gaussian") == 1);
}

TEST_CASE("degrade halves each dimension at scale 2 and can persist its kernel") {
  const fs::path in = corpus() / "img_000.ppm";
  const fs::path out = scratch() / "lr.ppm";
  const fs::path ker = scratch() / "used_kernel.txt";
  REQUIRE(run("degrade --in " + in.string() + " --out " + out.string() +
              " --scale 2 --random-gaussian --save-kernel " + ker.string()) == 0);
  const std::string bytes = slurp(out);
  CHECK(bytes.substr(0, 9) == "P6\n8 8\n25");
  const std::string spec = slurp(ker);
  CHECK(spec.substr(0, 8) == "gaussian");

  // a plain downscale cannot persist a kernel: there is none
  CHECK(run("degrade --in " + in.string() + " --out " + out.string() +
            " --scale 2 --save-kernel " + ker.string()) == 2);
}

TEST_CASE("pretraining writes a loadable model and a loss csv") {
  const fs::path csv = scratch() / "loss.csv";
  const fs::path m = scratch() / "trained.srft";
  REQUIRE(run("pretrain --corpus " + corpus().string() + " --out " + m.string() +
              " --scale 2 --blocks 1 --width 8 --patch 8 --pairs 8 --epochs 2 --batch 4" +
              " --loss-csv " + csv.string()) == 0);
  const std::string model_bytes = slurp(m);
  CHECK(model_bytes.substr(0, 4) == "SRFT");
  std::istringstream is(slurp(csv));
  std::string line;
  std::getline(is, line);
  CHECK(line == "epoch,loss");
  std::getline(is, line);
  CHECK(line.substr(0, 2) == "0,");
  std::getline(is, line);
  CHECK(line.substr(0, 2) == "1,");
  CHECK(run("pretrain --corpus " + corpus().string() + " --out " + m.string() +
            " --scale 2 --loss huber") == 1);  // not a member of {mae, mse}
}

TEST_CASE("finetune produces a model, an sr image, and a finished trace") {
  const fs::path lr = scratch() / "ft_in.ppm";
  REQUIRE(run("degrade --in " + (corpus() / "img_000.ppm").string() + " --out " + lr.string() +
              " --scale 2") == 0);
  const fs::path out_m = scratch() / "ft.srft";
  const fs::path out_sr = scratch() / "ft_sr.ppm";
  const fs::path trace = scratch() / "ft_trace.csv";
  REQUIRE(run("finetune --model " + tiny_model().string() + " --in " + lr.string() +
              " --out-model " + out_m.string() + " --out-sr " + out_sr.string() +
              " --trace " + trace.string() + " --max-iters 3") == 0);
  CHECK(slurp(out_m).substr(0, 4) == "SRFT");
  CHECK(slurp(out_sr).substr(0, 11) == "P6\n16 16\n25");
  const std::string tr = slurp(trace);
  CHECK(tr.substr(0, 18) == "iter,loss,lr_psnr_");
  CHECK(tr.find("# stop_reason=max_iters") != std::string::npos);
}

TEST_CASE("finetune is reproducible and thread-count independent") {
  const fs::path lr = scratch() / "det_in.ppm";
  REQUIRE(run("degrade --in " + (corpus() / "img_001.ppm").string() + " --out " + lr.string() +
              " --scale 2") == 0);
  fs::path sr1 = scratch() / "det_sr1.ppm";
  fs::path sr2 = scratch() / "det_sr2.ppm";
  fs::path sr4 = scratch() / "det_sr4.ppm";
  const std::string base = "finetune --model " + tiny_model().string() + " --in " + lr.string() +
                           " --max-iters 4 --out-sr ";
  REQUIRE(run("--threads 1 " + base + sr1.string()) == 0);
  REQUIRE(run("--threads 1 " + base + sr2.string()) == 0);
  REQUIRE(run("--threads 4 " + base + sr4.string()) == 0);
  CHECK(slurp(sr1) == slurp(sr2));
  CHECK(slurp(sr1) == slurp(sr4));
}

TEST_CASE("uncertainty renders a variance map at the sr size") {
  const fs::path lr = scratch() / "un_in.ppm";
  REQUIRE(run("degrade --in " + (corpus() / "img_000.ppm").string() + " --out " + lr.string() +
              " --scale 2") == 0);
  const fs::path map = scratch() / "un_map.pgm";
  REQUIRE(run("uncertainty --model " + tiny_model().string() + " --in " + lr.string() +
              " --out " + map.string() + " --p 0.05 --passes 6") == 0);
  CHECK(slurp(map).substr(0, 11) == "P5\n16 16\n25");
}

TEST_CASE("eval writes the benchmark csv with an average row") {
  const fs::path csv = scratch() / "eval.csv";
  REQUIRE(run("eval --model " + tiny_model().string() + " --images " + corpus().string() +
              " --scale 2 --max-iters 2 --csv " + csv.string()) == 0);
  std::istringstream is(slurp(csv));
  std::string line;
  std::getline(is, line);
  CHECK(line.substr(0, 6) == "image,");
  int rows = 0;
  bool average = false;
  while (std::getline(is, line)) {
    ++rows;
    if (line.substr(0, 8) == "average,") average = true;
  }
  CHECK(rows == 3);  // two images + the average row
  CHECK(average);
}

TEST_CASE("inject-artifact rewrites the model output stage") {
  const fs::path out = scratch() / "dotty.srft";
  REQUIRE(run("inject-artifact --in " + tiny_model().string() + " --out " + out.string() +
              " --eps 0.05 --period 4") == 0);
  CHECK(slurp(out).substr(0, 4) == "SRFT");
  CHECK(slurp(out) != slurp(tiny_model()));
  CHECK(run("inject-artifact --in " + tiny_model().string() + " --out " + out.string() +
            " --eps 0.05 --period 40") == 2);  // period out of range
}

TEST_CASE("surgery retargets a x4 model to x2") {
  // a x4 model straight from pretraining on a x4 degradation
  const fs::path m4 = scratch() / "m4.srft";
  REQUIRE(run("pretrain --corpus " + corpus().string() + " --out " + m4.string() +
              " --scale 4 --blocks 1 --width 8 --patch 16 --pairs 4 --epochs 1 --batch 4") == 0);
  const fs::path m2 = scratch() / "m2.srft";
  REQUIRE(run("surgery --in " + m4.string() + " --out " + m2.string() + " --to-scale 2") == 0);
  CHECK(slurp(m2).substr(0, 4) == "SRFT");
  CHECK(slurp(m2).size() < slurp(m4).size());  // a tail module was dropped
  // the surgered model super-resolves at x2
  const fs::path lr = scratch() / "sg_in.ppm";
  REQUIRE(run("degrade --in " + (corpus() / "img_000.ppm").string() + " --out " + lr.string() +
              " --scale 2") == 0);
  const fs::path sr = scratch() / "sg_sr.ppm";
  REQUIRE(run("finetune --model " + m2.string() + " --in " + lr.string() + " --max-iters 2" +
              " --out-sr " + sr.string()) == 0);
  CHECK(slurp(sr).substr(0, 11) == "P6\n16 16\n25");
}
