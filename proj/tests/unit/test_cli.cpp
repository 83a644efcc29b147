#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "dosmct/cli.hpp"
#include "dosmct/config.hpp"
#include "dosmct/io.hpp"
#include "dosmct/metrics.hpp"

using namespace dosmct;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "dosmct");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("dosmct_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const fs::path p = dir / name;
  write_text(p, j.dump(2));
  return p;
}

// Small problem: 32x32 grid, 90 full views, short schedule.
json small_config() {
  return json{{"seed", 3},
              {"full_views", 90},
              {"views", 23},
              {"grid", {{"nx", 32}, {"ny", 32}, {"pixel_size", 6.4}}},
              {"dosm", {{"schedule", {{"sigma_min", 0.01}, {"sigma_max", 20.0}, {"n_steps", 12}}},
                        {"dc_inner_iters", 3}}},
              {"fista", {{"iters", 30}, {"lambda_grid", {0.1, 1.0}}}},
              {"train", {{"hidden_channels", 4}, {"dilations", {1, 2, 1}}, {"epochs", 2},
                         {"n_images", 6}, {"batch_size", 3}, {"learning_rate", 1e-3}}}};
}

std::vector<std::string> array_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".f32raw") out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> csv_row(const std::string& text, int row) {
  std::istringstream in(text);
  std::string line;
  for (int k = 0; k <= row; ++k) std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ls(line);
  std::string cell;
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli({}) == kExitUsage);
  CHECK(cli({"frobnicate"}) == kExitUsage);
  CHECK(cli({"reconstruct", "--method", "art"}) == kExitUsage);
  CHECK(cli({"--help"}) == kExitOk);
  const fs::path dir = fresh_dir("usage");
  CHECK(cli({"simulate", "--config", (dir / "absent.json").string(), "--out", dir.string()}) == kExitUsage);
  json bad = small_config();
  bad["colour"] = "blue";
  CHECK(cli({"simulate", "--config", write_config(dir, "bad.json", bad).string(), "--out", dir.string()}) ==
        kExitUsage);
  json views = small_config();
  views["views"] = 91;
  CHECK(cli({"simulate", "--config", write_config(dir, "v.json", views).string(), "--out", dir.string()}) ==
        kExitUsage);
  CHECK(cli({"rerun", (dir / "nothing.json").string()}) == kExitUsage);
  CHECK(cli({"ablate", "--config", write_config(dir, "a.json", small_config()).string(), "--values", "",
             "--out", dir.string()}) != kExitOk);
}

TEST_CASE("runtime failures exit with code 1") {
  const fs::path dir = fresh_dir("runtime");
  json j = small_config();
  j["dosm"]["checkpoint"] = (dir / "missing.ckpt").string();
  CHECK(cli({"reconstruct", "--method", "dosm", "--config", write_config(dir, "c.json", j).string(), "--out",
             (dir / "o").string()}) == kExitRuntime);
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = DOSMCT_BINARY;
  CHECK(std::system((bin + " > /dev/null 2>&1").c_str()) != 0);
  CHECK(std::system((bin + " --version > /dev/null 2>&1").c_str()) == 0);
}

TEST_CASE("simulate writes a sparse sinogram and is reproducible") {
  const fs::path dir = fresh_dir("simulate");
  json j = small_config();
  j["noise"] = {{"sigma", 0.5}, {"seed", 9}};
  const auto cfg = write_config(dir, "c.json", j);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}) == kExitOk);
  REQUIRE(cli({"simulate", "--config", cfg.string(), "--out", (dir / "b").string()}) == kExitOk);
  const Sinogram s = read_sinogram(dir / "a" / "sinogram");
  CHECK(s.geometry.n_views() == 23);
  CHECK(read_sidecar(dir / "a" / "sinogram").at("shape") == json::array({23, 720}));
  CHECK(read_sinogram(dir / "a" / "sinogram_full").geometry.n_views() == 90);
  const auto files = array_files(dir / "a");
  CHECK(files.size() == 3);
  for (const auto& f : files) CHECK(bytes(dir / "a" / f) == bytes(dir / "b" / f));
  CHECK(bytes(dir / "a" / "phantom.pgm") == bytes(dir / "b" / "phantom.pgm"));
  const json m = read_json(dir / "a" / "manifest.json");
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("outputs").contains("sinogram"));
}

TEST_CASE("config values take precedence over flags") {
  const fs::path dir = fresh_dir("precedence");
  json with = small_config();
  with["views"] = 10;
  REQUIRE(cli({"simulate", "--config", write_config(dir, "w.json", with).string(), "--views", "23", "--out",
               (dir / "w").string()}) == kExitOk);
  CHECK(read_sinogram(dir / "w" / "sinogram").geometry.n_views() == 10);
  json without = small_config();
  without.erase("views");
  REQUIRE(cli({"simulate", "--config", write_config(dir, "wo.json", without).string(), "--views", "12", "--out",
               (dir / "wo").string()}) == kExitOk);
  CHECK(read_sinogram(dir / "wo" / "sinogram").geometry.n_views() == 12);

  const auto plain = write_config(dir, "p.json", small_config());
  CHECK(cli({"reconstruct", "--method", "dosm", "--config", plain.string(), "--out", (dir / "c0").string()}) ==
        kExitUsage);
  REQUIRE(cli({"reconstruct", "--method", "dosm", "--checkpoint", "zero", "--config", plain.string(), "--out",
               (dir / "c1").string()}) == kExitOk);
  CHECK(read_json(dir / "c1" / "manifest.json").at("config").at("dosm").at("checkpoint") == "zero");
  json set = small_config();
  set["dosm"]["checkpoint"] = "zero";
  REQUIRE(cli({"reconstruct", "--method", "dosm", "--checkpoint", (dir / "none.ckpt").string(), "--config",
               write_config(dir, "s.json", set).string(), "--out", (dir / "c2").string()}) == kExitOk);
}

TEST_CASE("reported FBP metrics match a recomputation") {
  const fs::path dir = fresh_dir("fbp");
  json j = small_config();
  j["views"] = 90;
  j["geometry"] = {{"mode", "parallel"}};
  j["phantom"] = {{"kind", "ellipse_set"},
                  {"shapes", {{{"center", {0, 0}}, {"axes", {60, 60}}, {"angle", 0}, {"amplitude", 1}}}}};
  REQUIRE(cli({"reconstruct", "--method", "fbp", "--config", write_config(dir, "c.json", j).string(), "--out",
               dir.string()}) == kExitOk);
  const auto row = csv_row(read_text(dir / "metrics.csv"), 1);
  REQUIRE(row.size() == 4);
  CHECK(row[0] == "fbp");
  CHECK(row[1] == "90");
  RunConfig cfg = config_from_json(j);
  const Image truth = make_phantom(cfg.phantom);
  const Image recon = read_image(dir / "recon");
  // The stored reconstruction is float32; recompute from it.
  CHECK(std::stod(row[2]) == doctest::Approx(psnr(recon, truth, value_range(truth))).epsilon(1e-5));
  CHECK(fs::exists(dir / "diff.f32raw"));
  CHECK(fs::exists(dir / "recon.pgm"));
}

TEST_CASE("every method runs and records metrics") {
  const fs::path dir = fresh_dir("methods");
  json j = small_config();
  j["dosm"]["checkpoint"] = "zero";
  const auto cfg = write_config(dir, "c.json", j);
  for (const std::string m : {"fbp", "sirt", "fista", "dosm"}) {
    REQUIRE(cli({"reconstruct", "--method", m, "--config", cfg.string(), "--out", (dir / m).string()}) ==
            kExitOk);
    CHECK(csv_row(read_text(dir / m / "metrics.csv"), 0) ==
          std::vector<std::string>{"method", "views", "psnr", "ssim"});
    CHECK(csv_row(read_text(dir / m / "metrics.csv"), 1)[0] == m);
  }
  CHECK(read_json(dir / "sirt" / "manifest.json").at("notes").at("sirt_iters") == 36);
  CHECK(read_json(dir / "fista" / "manifest.json").at("notes").contains("fista_lambda"));
  CHECK(csv_row(read_text(dir / "dosm" / "trace.csv"), 0) ==
        std::vector<std::string>{"step", "residual", "psnr", "ssim"});
}

TEST_CASE("training, sampling and the degenerate DOSM configuration") {
  const fs::path dir = fresh_dir("train");
  json j = small_config();
  const auto cfg = write_config(dir, "c.json", j);
  REQUIRE(cli({"train-score", "--config", cfg.string(), "--out", (dir / "t1").string()}) == kExitOk);
  REQUIRE(cli({"train-score", "--config", cfg.string(), "--out", (dir / "t2").string()}) == kExitOk);
  CHECK(bytes(dir / "t1" / "model.ckpt") == bytes(dir / "t2" / "model.ckpt"));
  CHECK(csv_row(read_text(dir / "t1" / "loss.csv"), 0) == std::vector<std::string>{"epoch", "loss"});

  json zero = j;
  zero["train"]["epochs"] = 0;
  REQUIRE(cli({"train-score", "--config", write_config(dir, "z.json", zero).string(), "--out",
               (dir / "t0").string()}) == kExitOk);
  const DenoiserModel loaded = load_checkpoint(dir / "t0" / "model.ckpt");
  DenoiserModel init(config_from_json(zero).train.arch);
  init.initialize(config_from_json(zero).train.init_seed);
  CHECK(std::equal(loaded.parameters().begin(), loaded.parameters().end(), init.parameters().begin()));

  json degenerate = j;
  degenerate["dosm"]["checkpoint"] = (dir / "t1" / "model.ckpt").string();
  degenerate["dosm"]["n_channels"] = 1;
  degenerate["dosm"]["dc_inner_iters"] = 0;
  degenerate["dosm"]["beta"] = 0.0;
  const auto dcfg = write_config(dir, "d.json", degenerate);
  REQUIRE(cli({"reconstruct", "--method", "dosm", "--config", dcfg.string(), "--out", (dir / "r").string()}) ==
          kExitOk);
  REQUIRE(cli({"sample", "--config", dcfg.string(), "--out", (dir / "s").string()}) == kExitOk);
  CHECK(bytes(dir / "r" / "recon.f32raw") == bytes(dir / "s" / "sample.f32raw"));
}

TEST_CASE("training loss falls on the toy set") {
  const fs::path dir = fresh_dir("train_loss");
  json j = small_config();
  j["train"]["epochs"] = 30;
  j["train"]["n_images"] = 32;
  j["train"]["hidden_channels"] = 8;
  REQUIRE(cli({"train-score", "--config", write_config(dir, "c.json", j).string(), "--out", dir.string()}) ==
          kExitOk);
  const std::string loss = read_text(dir / "loss.csv");
  double first = 0.0, last = 0.0;
  for (int e = 0; e < 5; ++e) {
    first += std::stod(csv_row(loss, 1 + e)[1]);
    last += std::stod(csv_row(loss, 26 + e)[1]);
  }
  CHECK(last < first);
}

TEST_CASE("ablation tables") {
  const fs::path dir = fresh_dir("ablate");
  json j = small_config();
  j["dosm"]["checkpoint"] = "zero";
  const auto cfg = write_config(dir, "c.json", j);
  REQUIRE(cli({"ablate", "--axis", "N", "--values", "5,1,3", "--config", cfg.string(), "--out",
               (dir / "n").string()}) == kExitOk);
  const std::string table = read_text(dir / "n" / "ablation.csv");
  CHECK(csv_row(table, 0) == std::vector<std::string>{"axis", "value", "psnr", "ssim", "seconds"});
  CHECK(csv_row(table, 1)[1] == "1");
  CHECK(csv_row(table, 2)[1] == "3");
  CHECK(csv_row(table, 3)[1] == "5");
  CHECK(csv_row(table, 4).empty());

  REQUIRE(cli({"ablate", "--axis", "beta", "--values", "0.1", "--config", cfg.string(), "--out",
               (dir / "b").string()}) == kExitOk);
  REQUIRE(cli({"reconstruct", "--method", "dosm", "--config", cfg.string(), "--out", (dir / "r").string()}) ==
          kExitOk);
  CHECK(bytes(dir / "b" / "recon_0.f32raw") == bytes(dir / "r" / "recon.f32raw"));

  json bad = j;
  bad["ablate"] = {{"axis", "N"}, {"values", json::array()}};
  CHECK(cli({"ablate", "--config", write_config(dir, "e.json", bad).string(), "--out", (dir / "e").string()}) ==
        kExitUsage);
  bad["ablate"] = {{"axis", "N"}, {"values", {1.5}}};
  CHECK(cli({"ablate", "--config", write_config(dir, "f.json", bad).string(), "--out", (dir / "f").string()}) ==
        kExitUsage);
}

TEST_CASE("a manifest reruns to byte-identical arrays") {
  const fs::path dir = fresh_dir("rerun");
  json j = small_config();
  j["dosm"]["checkpoint"] = "zero";
  j["noise"] = {{"sigma", 0.2}, {"seed", 4}};
  const auto cfg = write_config(dir, "c.json", j);
  for (const std::string cmd : {"simulate", "reconstruct"}) {
    const fs::path a = dir / (cmd + "_a"), b = dir / (cmd + "_b");
    std::vector<std::string> args = {cmd, "--config", cfg.string(), "--out", a.string()};
    if (cmd == "reconstruct") args.insert(args.end(), {"--method", "dosm"});
    REQUIRE(cli(args) == kExitOk);
    REQUIRE(cli({"rerun", (a / "manifest.json").string(), "--out", b.string()}) == kExitOk);
    const auto files = array_files(a);
    REQUIRE(!files.empty());
    CHECK(array_files(b) == files);
    for (const auto& f : files) CHECK(bytes(a / f) == bytes(b / f));
    CHECK(read_json(a / "manifest.json").at("config") == read_json(b / "manifest.json").at("config"));
  }
}
