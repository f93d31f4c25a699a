#include "semlink/cli/commands.hpp"

#include <atomic>
#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <thread>

#include "semlink/cli/csv.hpp"
#include "semlink/cli/dataset.hpp"
#include "semlink/cli/pipeline.hpp"
#include "semlink/codec/train.hpp"
#include "semlink/common/rng.hpp"
#include "semlink/detect/score.hpp"
#include "semlink/emu/server.hpp"

namespace semlink::cli {

namespace {

// shared channel realization per (image, SNR) cell so schemes and MRs are
// compared under identical noise
uint64_t cell_seed(uint64_t base, int image_idx, double snr_db) {
  uint64_t snr_key = static_cast<uint64_t>(static_cast<int64_t>(llround(snr_db * 1000.0)));
  return Rng::derive(Rng::derive(base, 0xce11u + static_cast<uint64_t>(image_idx)), snr_key);
}

void parallel_over(int n_items, int threads, const std::function<void(int item, int worker)>& fn) {
  int n_workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  n_workers = std::min(n_workers, std::max(1, n_items));
  if (n_workers == 1) {
    for (int i = 0; i < n_items; ++i) fn(i, 0);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n_items; i = next.fetch_add(1)) fn(i, w);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
        next.store(n_items);
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::unique_ptr<Transport> make_transport(const RunConfig& rc) {
  if (!rc.use_emulator()) return std::make_unique<LocalTransport>();
  std::string host;
  uint16_t port = 0;
  rc.parse_transport(&host, &port);
  return std::make_unique<EmulatorTransport>(host, port);
}

std::filesystem::path resolve_checkpoint(const RunConfig& rc, codec::CodecVariant variant) {
  if (!rc.checkpoint.empty()) {
    if (!std::filesystem::exists(rc.checkpoint))
      throw std::runtime_error("checkpoint not found: " + rc.checkpoint.string());
    return rc.checkpoint;
  }
  std::string tried;
  for (int stage : {3, 2, 1}) {
    auto p = stage_checkpoint_path(rc, stage, variant);
    if (std::filesystem::exists(p)) return p;
    tried += (tried.empty() ? "" : ", ") + p.string();
  }
  throw std::runtime_error("no checkpoint found; tried " + tried +
                           " (run `semlink train` first or pass checkpoint=...)");
}

masking::MrPolicy load_policy(const RunConfig& rc) {
  if (rc.policy_file.empty()) return masking::MrPolicy::paper_default();
  return masking::MrPolicy::load_csv(rc.policy_file);
}

}  // namespace

std::filesystem::path stage_checkpoint_path(const RunConfig& rc, int stage,
                                            codec::CodecVariant variant) {
  std::string suffix = variant == codec::CodecVariant::kCnnOnly ? "_cnn" : "";
  return rc.out_dir / ("stage" + std::to_string(stage) + suffix + ".slnn");
}

int cmd_train(int stage, const RunConfig& rc) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("train: stage must be 1, 2 or 3");
  auto cfg = rc.codec_config();
  auto images = load_dataset(rc.dataset_dir, 0, cfg.patch);
  auto samples = to_train_samples(images);

  codec::TrainOptions opt;
  opt.epochs = rc.epochs;
  opt.warmup_epochs = stage == 1 ? rc.warmup_epochs : 0;
  opt.batch_size = rc.batch;
  opt.lr = rc.lr;
  opt.channel = rc.channel;
  opt.seed = rc.seed;
  opt.checkpoint_dir = rc.out_dir / "checkpoints";
  if (rc.train_snr == "uniform") {
    opt.snr_uniform = true;
  } else {
    opt.snr_db = std::stod(rc.train_snr);
  }

  std::filesystem::create_directories(rc.out_dir);
  auto log_path = rc.out_dir / ("train_stage" + std::to_string(stage) +
                                (rc.variant == codec::CodecVariant::kCnnOnly ? "_cnn" : "") +
                                ".csv");
  std::ofstream log(log_path, std::ios::trunc);
  log << kCsvVersionLine << "\n" << "epoch,stage,channel,snr_db,loss,psnr\n";
  opt.log = &log;

  codec::TrainResult result;
  if (stage == 1) {
    result = codec::train_stage1(samples, cfg, opt);
  } else {
    auto prev = stage_checkpoint_path(rc, stage - 1, rc.variant);
    if (!rc.checkpoint.empty()) prev = rc.checkpoint;
    if (!std::filesystem::exists(prev))
      throw std::runtime_error("train stage " + std::to_string(stage) +
                               ": missing prerequisite checkpoint " + prev.string());
    auto init = codec::CodecParams::load(prev);
    result = stage == 2 ? codec::train_stage2(samples, cfg, init, opt)
                        : codec::finetune(samples, cfg, init, opt);
  }

  auto out = stage_checkpoint_path(rc, stage, rc.variant);
  result.params.save(out);
  std::cout << "stage " << stage << (result.diverged ? " DIVERGED (kept last good params)" : "")
            << ": " << result.epoch_loss.size() << " epochs, final loss "
            << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back()) << "\n"
            << "checkpoint: " << out.string() << "\nlog: " << log_path.string() << "\n";
  return result.diverged ? 1 : 0;
}

int cmd_mr_sweep(const RunConfig& rc) {
  auto cfg = rc.codec_config();
  auto images = load_dataset(rc.dataset_dir, rc.eval_count, cfg.patch);
  auto params = codec::CodecParams::load(resolve_checkpoint(rc, rc.variant));
  if (images.empty()) throw std::runtime_error("mr-sweep: empty evaluation set");

  struct Cell {
    double snr, mr, psnr_cs = 0, ssim_cs = 0;
  };
  std::vector<Cell> cells;
  for (double snr : rc.snr_list)
    for (double mr : rc.mr_list) cells.push_back({snr, mr});

  int n_workers = rc.threads > 0 ? rc.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  std::vector<std::unique_ptr<codec::Codec>> codecs;
  std::vector<std::unique_ptr<Transport>> transports;
  for (int w = 0; w < n_workers; ++w) {
    codecs.push_back(std::make_unique<codec::Codec>(cfg));
    codecs.back()->set_params(params);
    transports.push_back(make_transport(rc));
  }

  parallel_over(static_cast<int>(cells.size()), n_workers, [&](int ci, int w) {
    auto& cell = cells[static_cast<size_t>(ci)];
    phy::LinkConfig link = rc.link_config();
    link.snr_db = cell.snr;
    double sp = 0, ss = 0;
    for (size_t i = 0; i < images.size(); ++i) {
      auto rec = run_link_once(images[i], *codecs[static_cast<size_t>(w)], nullptr, cell.mr,
                               link, *transports[static_cast<size_t>(w)], rc.detector_cmd,
                               cell_seed(rc.seed, static_cast<int>(i), cell.snr));
      sp += rec.psnr_cs;
      ss += rec.ssim_cs;
    }
    cell.psnr_cs = sp / static_cast<double>(images.size());
    cell.ssim_cs = ss / static_cast<double>(images.size());
  });

  auto out = rc.out_dir / "mr_sweep.csv";
  CsvWriter w(out, {"snr_db", "mr", "psnr_cs", "ssim_cs"});
  for (const auto& c : cells)
    w.row({fmt_double(c.snr), fmt_double(c.mr), fmt_double(c.psnr_cs), fmt_double(c.ssim_cs)});
  std::cout << "mr-sweep over " << images.size() << " images -> " << out.string() << "\n";
  return 0;
}

int cmd_snr_sweep(const RunConfig& rc) {
  auto cfg = rc.codec_config();
  auto images = load_dataset(rc.dataset_dir, rc.eval_count, cfg.patch);
  auto policy = load_policy(rc);

  struct Scheme {
    std::string name;
    codec::CodecConfig cfg;
    codec::CodecParams params;
    bool adaptive = false;
  };
  std::vector<Scheme> schemes;
  auto vit_params = codec::CodecParams::load(resolve_checkpoint(rc, rc.variant));
  schemes.push_back({"adaptive", cfg, vit_params, true});
  schemes.push_back({"fixed-mr0", cfg, vit_params, false});
  std::filesystem::path cnn_ckpt = rc.checkpoint_cnn;
  if (cnn_ckpt.empty()) {
    for (int stage : {3, 2, 1}) {
      auto p = stage_checkpoint_path(rc, stage, codec::CodecVariant::kCnnOnly);
      if (std::filesystem::exists(p)) {
        cnn_ckpt = p;
        break;
      }
    }
  }
  if (!cnn_ckpt.empty() && std::filesystem::exists(cnn_ckpt)) {
    auto cnn_cfg = codec::CodecConfig::preset(rc.preset, codec::CodecVariant::kCnnOnly);
    schemes.push_back({"cnn-only", cnn_cfg, codec::CodecParams::load(cnn_ckpt), false});
  }

  struct Cell {
    double snr;
    size_t scheme;
    double psnr_cs = 0, ssim_cs = 0;
  };
  std::vector<Cell> cells;
  for (double snr : rc.snr_list)
    for (size_t s = 0; s < schemes.size(); ++s) cells.push_back({snr, s});

  // workers keep one codec per scheme
  int n_workers = rc.threads > 0 ? rc.threads
                                 : static_cast<int>(std::thread::hardware_concurrency());
  if (n_workers < 1) n_workers = 1;
  std::vector<std::vector<std::unique_ptr<codec::Codec>>> codecs(
      static_cast<size_t>(n_workers));
  std::vector<std::unique_ptr<Transport>> transports;
  for (int w = 0; w < n_workers; ++w) {
    for (const auto& sch : schemes) {
      codecs[static_cast<size_t>(w)].push_back(std::make_unique<codec::Codec>(sch.cfg));
      codecs[static_cast<size_t>(w)].back()->set_params(sch.params);
    }
    transports.push_back(make_transport(rc));
  }

  parallel_over(static_cast<int>(cells.size()), n_workers, [&](int ci, int w) {
    auto& cell = cells[static_cast<size_t>(ci)];
    const auto& sch = schemes[cell.scheme];
    phy::LinkConfig link = rc.link_config();
    link.snr_db = cell.snr;
    double sp = 0, ss = 0;
    for (size_t i = 0; i < images.size(); ++i) {
      auto rec = run_link_once(images[i], *codecs[static_cast<size_t>(w)][cell.scheme],
                               sch.adaptive ? &policy : nullptr, sch.adaptive ? -1.0 : 0.0,
                               link, *transports[static_cast<size_t>(w)], rc.detector_cmd,
                               cell_seed(rc.seed, static_cast<int>(i), cell.snr));
      sp += rec.psnr_cs;
      ss += rec.ssim_cs;
    }
    cell.psnr_cs = sp / static_cast<double>(images.size());
    cell.ssim_cs = ss / static_cast<double>(images.size());
  });

  auto out = rc.out_dir / "snr_sweep.csv";
  CsvWriter w(out, {"snr_db", "scheme", "psnr_cs", "ssim_cs"});
  for (const auto& c : cells)
    w.row({fmt_double(c.snr), schemes[c.scheme].name, fmt_double(c.psnr_cs),
           fmt_double(c.ssim_cs)});
  std::cout << "snr-sweep over " << images.size() << " images, " << schemes.size()
            << " schemes -> " << out.string() << "\n";
  return 0;
}

int cmd_transmit(const std::filesystem::path& image, double forced_mr, const RunConfig& rc) {
  auto cfg = rc.codec_config();
  EvalImage ei;
  ei.path = image;
  ei.image = vision::load_image(image);
  ei.dets = detect::load_detections(image, ei.image.width, ei.image.height);
  vision::PatchGrid grid(ei.image.height, ei.image.width, cfg.patch);
  auto kps = vision::dog_keypoints(ei.image);
  ei.kp_counts = vision::keypoints_per_patch(kps, grid);
  ei.order = masking::importance_order(ei.dets, ei.kp_counts, grid);
  auto obj = masking::object_patches(ei.dets, grid);
  int n_obj = 0;
  for (uint8_t o : obj) n_obj += o;
  ei.object_area_frac = static_cast<double>(n_obj) / grid.total();

  codec::Codec codec(cfg);
  codec.set_params(codec::CodecParams::load(resolve_checkpoint(rc, rc.variant)));
  auto policy = load_policy(rc);
  auto transport = make_transport(rc);

  vision::ImageTensor restored;
  auto rec = run_link_once(ei, codec, &policy, forced_mr, rc.link_config(), *transport,
                           rc.detector_cmd, cell_seed(rc.seed, 0, rc.snr_db), &restored);

  std::filesystem::create_directories(rc.out_dir);
  auto stem = image.stem().string();
  auto out_img = rc.out_dir / (stem + "_restored.ppm");
  vision::save_image(restored, out_img);

  nlohmann::json j{{"image", image.string()},
                   {"channel", phy::channel_name(rc.channel)},
                   {"snr_db", rc.snr_db},
                   {"transport", rc.transport},
                   {"mr", rec.mr},
                   {"psnr_db", rec.psnr_db},
                   {"ssim", rec.ssim},
                   {"cs", rec.cs},
                   {"psnr_cs", rec.psnr_cs},
                   {"ssim_cs", rec.ssim_cs}};
  auto out_json = rc.out_dir / (stem + "_metrics.json");
  std::ofstream jf(out_json, std::ios::trunc);
  jf << j.dump(2) << "\n";

  std::cout << "restored: " << out_img.string() << "\nmetrics:  " << out_json.string() << "\n"
            << "mr " << rec.mr << ", psnr " << rec.psnr_db << " dB, PSNR+CS/SSIM+CS "
            << detect::format_metric_pair({rec.psnr_cs, rec.ssim_cs}) << "\n";
  return 0;
}

int cmd_report(const std::vector<std::filesystem::path>& inputs,
               const std::filesystem::path& out_path) {
  std::vector<CsvTable> tables;
  for (const auto& p : inputs) tables.push_back(read_csv(p));
  auto agg = aggregate_tables(tables);
  CsvWriter w(out_path, agg.columns);
  for (const auto& row : agg.rows) w.row(row);

  // text summary; PSNR+CS/SSIM+CS pairs use the compact reported style
  int pm = agg.column_index("psnr_cs_mean");
  int sm = agg.column_index("ssim_cs_mean");
  std::cout << "report -> " << out_path.string() << "\n";
  for (const auto& row : agg.rows) {
    std::string keys;
    for (size_t c = 0; c < agg.columns.size(); ++c) {
      if (agg.columns[c].find("_mean") != std::string::npos ||
          agg.columns[c].find("_ci95") != std::string::npos)
        continue;
      keys += agg.columns[c] + "=" + row[c] + " ";
    }
    std::cout << "  " << keys;
    if (pm >= 0 && sm >= 0) {
      detect::CombinedMetrics m{std::stod(row[static_cast<size_t>(pm)]),
                                std::stod(row[static_cast<size_t>(sm)])};
      std::cout << "PSNR+CS/SSIM+CS " << detect::format_metric_pair(m);
    }
    std::cout << "\n";
  }
  return 0;
}

namespace {
std::atomic<bool>* g_stop = nullptr;
void handle_sigint(int) {
  if (g_stop) g_stop->store(true);
}
}  // namespace

int cmd_emulate(const std::string& bind, const RunConfig& rc) {
  std::string host = "127.0.0.1";
  uint16_t port = 9009;
  if (!bind.empty()) {
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("emulate: bind must be host:port");
    host = bind.substr(0, colon);
    port = static_cast<uint16_t>(std::stoi(bind.substr(colon + 1)));
  }
  emu::EmuConfig cfg;
  cfg.channel = rc.channel;
  cfg.snr_db = static_cast<float>(rc.snr_db);
  cfg.seed = rc.seed;
  emu::EmuServer server(host, port, cfg, rc.seed);
  std::atomic<bool> stop{false};
  g_stop = &stop;
  std::signal(SIGINT, handle_sigint);
  std::signal(SIGTERM, handle_sigint);
  std::cout << "channel emulator on " << host << ":" << server.port() << " ("
            << phy::channel_name(rc.channel) << ", " << rc.snr_db << " dB, seed " << rc.seed
            << ")\n";
  server.run(stop);
  auto st = server.stats();
  std::cout << "frames_ok " << st.frames_ok << ", dropped " << st.frames_dropped
            << ", malformed " << st.frames_malformed << "\n";
  return 0;
}

int cmd_gen_dataset(const RunConfig& rc, int count, int size) {
  generate_dataset(rc.dataset_dir, count, size, rc.seed);
  std::cout << "wrote " << count << " " << size << "x" << size << " images to "
            << rc.dataset_dir.string() << "\n";
  return 0;
}

}  // namespace semlink::cli
