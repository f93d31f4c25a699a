#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "semlink/cli/commands.hpp"
#include "semlink/cli/csv.hpp"
#include "semlink/cli/dataset.hpp"
#include "semlink/cli/pipeline.hpp"
#include "semlink/cli/run_config.hpp"
#include "semlink/emu/server.hpp"
#include "semlink/vision/metrics.hpp"

using namespace semlink;
using namespace semlink::cli;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  explicit TmpDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("csv: version line, fixed formatting, read-back") {
  TmpDir tmp("semlink_csv_test");
  auto p = tmp.path / "t.csv";
  {
    CsvWriter w(p, {"snr_db", "mr", "psnr_cs"});
    w.row({fmt_double(10), fmt_double(0.3), fmt_double(0.651234567)});
  }
  std::ifstream f(p);
  std::string first;
  std::getline(f, first);
  CHECK(first == "# semlink-csv v1");

  auto t = read_csv(p);
  REQUIRE(t.columns.size() == 3);
  CHECK(t.columns[1] == "mr");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][2] == "0.651235");
}

TEST_CASE("report aggregation: identity, CI columns, mismatched headers") {
  CsvTable a;
  a.columns = {"snr_db", "mr", "psnr_cs"};
  a.rows = {{"0", "0.3", "0.5"}, {"10", "0.3", "0.7"}};
  auto single = aggregate_tables({a});
  REQUIRE(single.rows.size() == 2);
  CHECK(single.column_index("psnr_cs_mean") >= 0);
  CHECK(single.rows[0][static_cast<size_t>(single.column_index("psnr_cs_mean"))] ==
        fmt_double(0.5));
  CHECK(single.rows[0][static_cast<size_t>(single.column_index("psnr_cs_ci95"))] ==
        fmt_double(0.0));

  CsvTable b = a;
  b.rows = {{"0", "0.3", "0.6"}, {"10", "0.3", "0.8"}};
  auto two = aggregate_tables({a, b});
  REQUIRE(two.rows.size() == 2);
  double mean = std::stod(two.rows[0][static_cast<size_t>(two.column_index("psnr_cs_mean"))]);
  double ci = std::stod(two.rows[0][static_cast<size_t>(two.column_index("psnr_cs_ci95"))]);
  CHECK(mean == doctest::Approx(0.55));
  CHECK(ci > 0.0);

  CsvTable c = a;
  c.columns = {"snr_db", "scheme", "psnr_cs"};
  CHECK_THROWS_WITH_AS(aggregate_tables({a, c}), doctest::Contains("scheme"),
                       std::runtime_error);
}

TEST_CASE("run config: file parsing, overrides, unknown keys, env seed") {
  TmpDir tmp("semlink_rc_test");
  auto p = tmp.path / "run.conf";
  {
    std::ofstream f(p);
    f << "# comment\n"
      << "dataset_dir = /tmp/ds\n"
      << "snr_list = -5, 0, 15\n"
      << "channel = rayleigh-mp\n"
      << "epochs = 7\n";
  }
  auto rc = load_run_config(p);
  CHECK(rc.dataset_dir == "/tmp/ds");
  CHECK(rc.snr_list == std::vector<double>{-5, 0, 15});
  CHECK(rc.channel == phy::ChannelModel::kRayleighMultipath);
  CHECK(rc.epochs == 7);

  rc.set("mr_list", "0,0.5");
  CHECK(rc.mr_list == std::vector<double>{0, 0.5});
  CHECK_THROWS_WITH_AS(rc.set("bogus_key", "1"), doctest::Contains("bogus_key"),
                       std::invalid_argument);

  {
    std::ofstream f(p);
    f << "epochs 7\n";
  }
  CHECK_THROWS_AS(load_run_config(p), std::runtime_error);

  setenv("SEMLINK_SEED", "4242", 1);
  CHECK(seed_from_env_or(1) == 4242);
  unsetenv("SEMLINK_SEED");
  CHECK(seed_from_env_or(9) == 9);
}

TEST_CASE("dataset: generation is deterministic, loadable, annotated") {
  TmpDir tmp("semlink_ds_test");
  generate_dataset(tmp.path / "a", 6, 32, 11);
  generate_dataset(tmp.path / "b", 6, 32, 11);
  auto da = load_dataset(tmp.path / "a", 0, 8);
  auto db = load_dataset(tmp.path / "b", 0, 8);
  REQUIRE(da.size() == 6);
  for (size_t i = 0; i < da.size(); ++i) {
    CHECK(da[i].image.data == db[i].image.data);
    CHECK(da[i].image.height == 32);
    CHECK(!da[i].dets.empty());
    CHECK(da[i].object_area_frac > 0);
    CHECK(da[i].order.size() == 16);
  }
  // a different seed changes content
  generate_dataset(tmp.path / "c", 6, 32, 12);
  auto dc = load_dataset(tmp.path / "c", 0, 8);
  CHECK(dc[0].image.data != da[0].image.data);
  // cap honored
  CHECK(load_dataset(tmp.path / "a", 3, 8).size() == 3);
}

TEST_CASE("pipeline: noiseless transmit consistency and forced-MR-0 restore identity") {
  TmpDir tmp("semlink_pipe_test");
  generate_dataset(tmp.path, 3, 32, 21);
  auto images = load_dataset(tmp.path, 0, 8);
  auto cfg = codec::CodecConfig::toy_vit();
  auto params = codec::init_codec_params(cfg, 3);
  codec::Codec codec(cfg);
  codec.set_params(params);

  phy::LinkConfig link;
  link.channel = phy::ChannelModel::kNoiseless;
  LocalTransport local;

  vision::ImageTensor restored;
  auto rec = run_link_once(images[0], codec, nullptr, 0.0, link, local, "", 5, &restored);

  // MR 0: nothing masked, restore is the identity, so the end-to-end PSNR
  // equals the codec's own noiseless reconstruction PSNR
  vision::PatchGrid grid(32, 32, 8);
  auto plan = masking::build_mask_plan(images[0].order, 0.0, images[0].dets, grid, 32, 32, 3);
  auto direct = codec.decode(codec::dequantize(codec.encode(images[0].image, plan)), plan);
  CHECK(vision::psnr(images[0].image, restored) == doctest::Approx(rec.psnr_db));
  CHECK(vision::psnr(images[0].image, direct) == doctest::Approx(rec.psnr_db).epsilon(1e-9));
  CHECK(restored.data == direct.data);

  // annotations stand in for predictions: CS equals the mean annotated conf
  double expect_cs = 0;
  for (const auto& d : images[0].dets.items) expect_cs += d.conf;
  expect_cs /= static_cast<double>(images[0].dets.size());
  CHECK(rec.cs == doctest::Approx(expect_cs));
}

TEST_CASE("pipeline: emulator transport matches local in the noiseless channel") {
  TmpDir tmp("semlink_pipe_emu");
  generate_dataset(tmp.path, 2, 32, 22);
  auto images = load_dataset(tmp.path, 0, 8);
  auto cfg = codec::CodecConfig::toy_vit();
  auto params = codec::init_codec_params(cfg, 3);
  codec::Codec codec(cfg);
  codec.set_params(params);

  emu::EmuConfig ecfg;
  ecfg.channel = phy::ChannelModel::kNoiseless;
  emu::EmuServer server("127.0.0.1", 0, ecfg, 1);
  std::atomic<bool> stop{false};
  std::thread th([&] { server.run(stop); });

  phy::LinkConfig link;
  link.channel = phy::ChannelModel::kNoiseless;
  LocalTransport local;
  EmulatorTransport remote("127.0.0.1", server.port());

  vision::ImageTensor a, b;
  run_link_once(images[0], codec, nullptr, 0.3, link, local, "", 5, &a);
  run_link_once(images[0], codec, nullptr, 0.3, link, remote, "", 5, &b);
  stop = true;
  th.join();

  // float32 wire quantization only; identical after 8-bit materialization
  REQUIRE(a.data.size() == b.data.size());
  double worst = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  CHECK(worst < 1e-4);
}

TEST_CASE("cmd_train: stage 2 without a stage-1 checkpoint names the missing path") {
  TmpDir tmp("semlink_cmd_train");
  generate_dataset(tmp.path / "data", 4, 32, 31);
  RunConfig rc;
  rc.dataset_dir = tmp.path / "data";
  rc.out_dir = tmp.path / "out";
  rc.epochs = 1;
  CHECK_THROWS_WITH_AS(cmd_train(2, rc), doctest::Contains("stage1.slnn"), std::runtime_error);
}

TEST_CASE("cmd_train + sweeps: reproducible byte-identical CSV outputs") {
  TmpDir tmp("semlink_cmd_repro");
  generate_dataset(tmp.path / "data", 6, 32, 41);
  RunConfig rc;
  rc.dataset_dir = tmp.path / "data";
  rc.out_dir = tmp.path / "out1";
  rc.epochs = 1;
  rc.seed = 99;
  rc.eval_count = 3;
  rc.snr_list = {0, 10};
  rc.mr_list = {0, 0.4};
  REQUIRE(cmd_train(1, rc) == 0);
  rc.checkpoint = rc.out_dir / "stage1.slnn";
  REQUIRE(cmd_mr_sweep(rc) == 0);

  RunConfig rc2 = rc;
  rc2.out_dir = tmp.path / "out2";
  rc2.checkpoint.clear();
  REQUIRE(cmd_train(1, rc2) == 0);
  rc2.checkpoint = rc2.out_dir / "stage1.slnn";
  REQUIRE(cmd_mr_sweep(rc2) == 0);

  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  };
  CHECK(slurp(tmp.path / "out1/stage1.slnn") == slurp(tmp.path / "out2/stage1.slnn"));
  CHECK(slurp(tmp.path / "out1/mr_sweep.csv") == slurp(tmp.path / "out2/mr_sweep.csv"));
  CHECK(slurp(tmp.path / "out1/train_stage1.csv") == slurp(tmp.path / "out2/train_stage1.csv"));
}

TEST_CASE("cmd_report: merges sweeps into means with CI and writes the summary") {
  TmpDir tmp("semlink_cmd_report");
  auto w1 = tmp.path / "a.csv";
  auto w2 = tmp.path / "b.csv";
  {
    CsvWriter w(w1, {"snr_db", "mr", "psnr_cs", "ssim_cs"});
    w.row({"0", "0.3", "0.5", "0.6"});
  }
  {
    CsvWriter w(w2, {"snr_db", "mr", "psnr_cs", "ssim_cs"});
    w.row({"0", "0.3", "0.7", "0.8"});
  }
  auto out = tmp.path / "agg.csv";
  REQUIRE(cmd_report({w1, w2}, out) == 0);
  auto t = read_csv(out);
  REQUIRE(t.rows.size() == 1);
  CHECK(std::stod(t.rows[0][static_cast<size_t>(t.column_index("psnr_cs_mean"))]) ==
        doctest::Approx(0.6));
  CHECK(std::stod(t.rows[0][static_cast<size_t>(t.column_index("ssim_cs_ci95"))]) > 0);
}
