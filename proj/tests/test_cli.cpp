// End-to-end CLI checks; argv[1] = hbvar binary, argv[2] = scratch directory.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string g_binary;
fs::path g_tmp;

int run_cmd(const std::string& args) {
  std::string cmd = g_binary + " " + args + " >> " + (g_tmp / "log.txt").string() +
                    " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("simulate -> validate -> tune -> fit -> waic -> connectivity") {
  fs::path data = g_tmp / "data";
  REQUIRE(run_cmd("simulate --out " + data.string() +
                  " --regions 2 --subjects 3 --timepoints 60 --lags 1 --seed 11") == 0);
  REQUIRE(fs::exists(data / "manifest.json"));
  REQUIRE(fs::exists(data / "ground_truth.json"));

  std::string manifest = (data / "manifest.json").string();
  CHECK(run_cmd("validate --data " + manifest) == 0);

  fs::path tune_out = g_tmp / "tune.json";
  CHECK(run_cmd("tune --data " + manifest + " --lags 1 --out " + tune_out.string() +
                " --max-iter 200") == 0);
  REQUIRE(fs::exists(tune_out));

  fs::path out = g_tmp / "fits";
  CHECK(run_cmd("fit --data " + manifest + " --model 2 --lags 1 --seed 5 --out " +
                out.string() + " --run-name m2 --hyper " + tune_out.string() +
                " --exact-draws 400") == 0);
  fs::path run_dir = out / "runs" / "m2";
  REQUIRE(fs::exists(run_dir / "draws" / "draws.csv"));
  REQUIRE(fs::exists(run_dir / "manifest.json"));
  // exact sampling: no MCMC diagnostics to report
  CHECK_FALSE(fs::exists(run_dir / "reports" / "rhat.csv"));
  std::string sidecar = slurp(run_dir / "draws" / "draws.json");
  CHECK(sidecar.find("\"divergences\": 0") != std::string::npos);

  CHECK(run_cmd("fit --data " + manifest + " --model 3 --lags 1 --seed 5 --out " +
                out.string() + " --run-name m3 --hyper " + tune_out.string() +
                " --exact-draws 400") == 0);

  fs::path waic_out = g_tmp / "waic.json";
  CHECK(run_cmd("waic --data " + manifest + " --fit " + run_dir.string() + " --fit " +
                (out / "runs" / "m3").string() + " --out " + waic_out.string()) == 0);
  CHECK(slurp(waic_out).find("\"waic\"") != std::string::npos);
  std::string md = slurp(g_tmp / "waic.md");
  CHECK(md.find("Model 2") != std::string::npos);
  CHECK(md.find("Model 3") != std::string::npos);
  CHECK(md.find("L=1") != std::string::npos);
  CHECK(md.find(" - |") != std::string::npos);  // model 1 cell empty

  fs::path conn_out = g_tmp / "conn";
  CHECK(run_cmd("connectivity --fit " + run_dir.string() + " --out " +
                conn_out.string()) == 0);
  CHECK(fs::exists(conn_out / "edges.csv"));
  CHECK(fs::exists(conn_out / "region_weights.csv"));
  CHECK(fs::exists(conn_out / "rules.json"));
}

TEST_CASE("model 1 fit writes rhat table and diff works across two groups") {
  fs::path data_a = g_tmp / "grp_a";
  fs::path data_b = g_tmp / "grp_b";
  REQUIRE(run_cmd("simulate --out " + data_a.string() +
                  " --regions 2 --subjects 4 --timepoints 50 --lags 1 --seed 21 "
                  "--nu 6") == 0);
  REQUIRE(run_cmd("simulate --out " + data_b.string() +
                  " --regions 2 --subjects 4 --timepoints 50 --lags 1 --seed 22 "
                  "--nu 6") == 0);

  fs::path out = g_tmp / "fits";
  CHECK(run_cmd("fit --data " + (data_a / "manifest.json").string() +
                " --model 1 --lags 1 --seed 7 --out " + out.string() +
                " --run-name m1a --chains 2 --warmup 150 --draws 200") == 0);
  fs::path run_a = out / "runs" / "m1a";
  CHECK(fs::exists(run_a / "reports" / "rhat.csv"));
  CHECK(slurp(run_a / "draws" / "draws.csv").find("nu") != std::string::npos);

  CHECK(run_cmd("fit --data " + (data_b / "manifest.json").string() +
                " --model 1 --lags 1 --seed 8 --out " + out.string() +
                " --run-name m1b --chains 2 --warmup 150 --draws 200") == 0);

  fs::path diff_out = g_tmp / "diff";
  CHECK(run_cmd("diff --fit-a " + run_a.string() + " --fit-b " +
                (out / "runs" / "m1b").string() + " --out " + diff_out.string() +
                " --scatter") == 0);
  CHECK(fs::exists(diff_out / "edges.csv"));
  std::string scatter = slurp(diff_out / "scatter.csv");
  CHECK(scatter.find("parameter,mean_a,mean_b,sd_a,sd_b,tratio_a,tratio_b") == 0);
  CHECK(scatter.find("ar_l1_from1_to1") != std::string::npos);
  CHECK(scatter.find("corr_1_2") != std::string::npos);
}

TEST_CASE("reruns with identical config produce byte-identical draw files") {
  fs::path data = g_tmp / "data";  // from the first test case
  std::string manifest = (data / "manifest.json").string();
  fs::path out = g_tmp / "repro";
  std::string common = "fit --data " + manifest +
                       " --model 2 --lags 1 --seed 99 --out " + out.string() +
                       " --exact-draws 300 --run-name ";
  REQUIRE(run_cmd(common + "r1") == 0);
  REQUIRE(run_cmd(common + "r2") == 0);
  CHECK(slurp(out / "runs" / "r1" / "draws" / "draws.csv") ==
        slurp(out / "runs" / "r2" / "draws" / "draws.csv"));
  CHECK(slurp(out / "runs" / "r1" / "draws" / "draws.json") ==
        slurp(out / "runs" / "r2" / "draws" / "draws.json"));
}

TEST_CASE("exit codes: validation failures and stale artifacts") {
  CHECK(run_cmd("validate --data " + (g_tmp / "missing.json").string()) == 2);

  // ragged csv -> validation exit code
  fs::path bad_dir = g_tmp / "bad";
  fs::create_directories(bad_dir);
  std::ofstream(bad_dir / "s.csv") << "R1,R2\n1.0,2.0\n3.0\n";
  std::ofstream(bad_dir / "manifest.json")
      << R"({"group_id": "bad", "subjects": ["s.csv"]})";
  CHECK(run_cmd("validate --data " + (bad_dir / "manifest.json").string()) == 2);

  // tamper with a persisted draw file: downstream commands must refuse it
  fs::path run_dir = g_tmp / "repro" / "runs" / "r1";
  std::ofstream(run_dir / "draws" / "draws.csv", std::ios::app) << "tampered\n";
  CHECK(run_cmd("connectivity --fit " + run_dir.string() + " --out " +
                (g_tmp / "tampered_conn").string()) == 2);
}

TEST_CASE("unreliable fit exits with the convergence code but keeps artifacts") {
  // homogeneous subjects (huge nu) leave nu unidentified: the flat-prior
  // posterior drifts and chains disagree, which must flag the fit
  fs::path data = g_tmp / "homog";
  REQUIRE(run_cmd("simulate --out " + data.string() +
                  " --regions 2 --subjects 3 --timepoints 60 --lags 1 --seed 41 "
                  "--nu 500") == 0);
  fs::path out = g_tmp / "flagged";
  int code = run_cmd("fit --data " + (data / "manifest.json").string() +
                     " --model 1 --lags 1 --seed 13 --out " + out.string() +
                     " --run-name drift --chains 2 --warmup 150 --draws 200");
  CHECK(code == 4);
  CHECK(fs::exists(out / "runs" / "drift" / "draws" / "draws.csv"));
  CHECK(fs::exists(out / "runs" / "drift" / "reports" / "rhat.csv"));
}

TEST_CASE("config file supplies defaults, flags win") {
  fs::path data = g_tmp / "data";
  std::string manifest = (data / "manifest.json").string();
  std::ofstream(g_tmp / "cfg.json")
      << R"({"model": 2, "lags": 1, "seed": 4242, "exact-draws": 250, "out": ")"
      << (g_tmp / "cfg_out").string() << R"(", "run-name": "from_cfg"})";
  REQUIRE(run_cmd("--config " + (g_tmp / "cfg.json").string() + " fit --data " +
                  manifest) == 0);
  REQUIRE(fs::exists(g_tmp / "cfg_out" / "runs" / "from_cfg" / "draws" / "draws.csv"));

  // flag overrides the config's run name
  REQUIRE(run_cmd("--config " + (g_tmp / "cfg.json").string() + " fit --data " +
                  manifest + " --run-name from_flag") == 0);
  CHECK(fs::exists(g_tmp / "cfg_out" / "runs" / "from_flag" / "draws" / "draws.csv"));
}

TEST_CASE("pipeline produces the full report and consumes the flagged lag") {
  fs::path data_a = g_tmp / "pg_a";
  fs::path data_b = g_tmp / "pg_b";
  REQUIRE(run_cmd("simulate --out " + data_a.string() +
                  " --regions 2 --subjects 3 --timepoints 40 --lags 1 --seed 31 "
                  "--nu 6") == 0);
  REQUIRE(run_cmd("simulate --out " + data_b.string() +
                  " --regions 2 --subjects 3 --timepoints 40 --lags 1 --seed 32 "
                  "--nu 6") == 0);

  fs::path out = g_tmp / "pipe";
  int code = run_cmd("pipeline --data " + (data_a / "manifest.json").string() +
                     " --data-b " + (data_b / "manifest.json").string() + " --out " +
                     out.string() +
                     " --seed 3 --max-lag 2 --chains 2 --warmup 120 --draws 150 "
                     "--exact-draws 300");
  CHECK((code == 0 || code == 4));  // short chains may flag convergence

  fs::path runs = out / "runs";
  REQUIRE(fs::exists(runs));
  fs::path run_dir;
  for (const auto& entry : fs::directory_iterator(runs)) run_dir = entry.path();
  CHECK(fs::exists(run_dir / "reports" / "waic.md"));
  CHECK(fs::exists(run_dir / "reports" / "waic.json"));
  std::string waic_json = slurp(run_dir / "reports" / "waic.json");
  CHECK(waic_json.find("best_L_model1") != std::string::npos);
  // 2 groups x 2 lags x 3 models of fits, connectivity for each group, diff
  CHECK(fs::exists(run_dir / "groups"));
  CHECK(fs::exists(run_dir / "connectivity"));
  CHECK(fs::exists(run_dir / "diff" / "model1" / "edges.csv"));
  std::string md = slurp(run_dir / "reports" / "waic.md");
  CHECK(md.find("Model 1") != std::string::npos);
  CHECK(md.find("L=2") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: test_cli <hbvar-binary> <tmp-dir>\n");
    return 1;
  }
  g_binary = argv[1];
  g_tmp = argv[2];
  std::error_code ec;
  fs::remove_all(g_tmp, ec);
  fs::create_directories(g_tmp);

  doctest::Context ctx;
  ctx.applyCommandLine(1, argv);
  return ctx.run();
}
