// fibcap: end-to-end fibrous-cap pipeline over polar IVOCT pullbacks.
//
// Subcommands: phantom, preprocess, pretrain, train, segment, quantify,
// evaluate, report. Exit codes: 0 success, 2 usage error, 3 data error,
// 4 numeric error.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fibcap/io.hpp"
#include "fibcap/phantom.hpp"
#include "fibcap/postprocess.hpp"
#include "fibcap/preprocess.hpp"
#include "fibcap/quantify.hpp"
#include "fibcap/stats.hpp"
#include "fibcap/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fibcap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int default_threads() {
  if (const char* env = std::getenv("FIBCAP_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// "a..b" -> [a, b) frame range.
std::pair<int, int> parse_frames(const std::string& spec) {
  const auto pos = spec.find("..");
  if (pos == std::string::npos)
    throw CLI::ValidationError("--frames", "expected a..b (half-open)");
  const int a = std::stoi(spec.substr(0, pos));
  const int b = std::stoi(spec.substr(pos + 2));
  if (a < 0 || b <= a)
    throw CLI::ValidationError("--frames", "need 0 <= a < b");
  return {a, b};
}

std::string frame_name(const std::string& prefix, int f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04d.pgm", prefix.c_str(), f);
  return buf;
}

json shadow_to_json(const GuidewireShadow& s) {
  return {{"theta_start", s.theta_start},
          {"theta_end", s.theta_end},
          {"low_confidence", s.low_confidence}};
}

json lumen_to_json(const LumenBoundary& l) {
  json valid = json::array();
  for (bool v : l.valid) valid.push_back(v);
  return {{"r_index", l.r_index}, {"valid", valid}};
}

// ---- phantom --------------------------------------------------------------

int cmd_phantom(const std::string& suite, const fs::path& out,
                std::optional<uint64_t> seed) {
  auto suites = standard_suites();
  const auto it = suites.find(suite);
  if (it == suites.end()) {
    std::cerr << "unknown suite '" << suite << "'; available:";
    for (const auto& [name, spec] : suites) std::cerr << " " << name;
    std::cerr << "\n";
    return kExitData;
  }
  PhantomSpec spec = it->second;
  if (seed) spec.seed = *seed;
  auto [pb, truth] = generate_phantom(spec);

  fs::create_directories(out);
  save_pullback(pb, out / "pullback.ivp");
  json truth_json;
  truth_json["suite"] = suite;
  truth_json["seed"] = spec.seed;
  for (int f = 0; f < pb.n_frames(); ++f) {
    save_mask_pgm(truth.fc_masks[f], out / frame_name("fc_", f));
    save_mask_pgm(truth.cal_masks[f], out / frame_name("cal_", f));
    json frame;
    frame["lumen"] = lumen_to_json(truth.lumens[f]);
    frame["shadow"] = shadow_to_json(truth.shadows[f]);
    json thick = json::array();
    for (const auto& t : truth.thickness_um[f])
      thick.push_back(t ? json(*t) : json(nullptr));
    frame["thickness_um"] = thick;
    truth_json["frames"].push_back(frame);
  }
  std::ofstream(out / "truth.json") << truth_json.dump(2) << "\n";
  std::cout << "wrote " << pb.n_frames() << " frames to " << out << "\n";
  return kExitOk;
}

// ---- preprocess -----------------------------------------------------------

int cmd_preprocess(const fs::path& in, const fs::path& out) {
  Pullback pb = load_pullback(in);
  const auto shadows = detect_guidewire_pullback(pb);

  Pullback pre;
  pre.geometry = pb.geometry;
  pre.pullback_id = pb.pullback_id + "-pre";
  json meta;
  for (int f = 0; f < pb.n_frames(); ++f) {
    const auto lumen = segment_lumen(pb.frames[f], shadows[f]);
    const auto shifted = pixel_shift(pb.frames[f], lumen, shadows[f]);
    auto pf = crop_and_filter(shifted, lumen, shadows[f]);
    PolarFrame frame;
    frame.frame_index = f;
    frame.data = std::move(pf.data);
    pre.frames.push_back(std::move(frame));
    json rec;
    rec["frame"] = f;
    rec["lumen"] = lumen_to_json(lumen);
    rec["shadow"] = shadow_to_json(shadows[f]);
    meta["frames"].push_back(rec);
  }
  fs::create_directories(out);
  save_pullback(pre, out / "preprocessed.ivp", "f32");
  std::ofstream(out / "preprocess.json") << meta.dump(2) << "\n";
  std::cout << "preprocessed " << pb.n_frames() << " frames\n";
  return kExitOk;
}

// ---- training (shared by pretrain and train) --------------------------------

struct TrainOptions {
  fs::path pullback, masks, out, config;
  fs::path pretrained;
  std::string mask_prefix = "fc_";
  int levels = 2, filters = 8;
  int crop_rows = 96, crop_cols = 112;
  double val_fraction = 0.125;
  TrainConfig tc;
};

void apply_config(TrainOptions& opt) {
  if (opt.config.empty()) return;
  std::ifstream f(opt.config);
  if (!f) throw std::runtime_error("cannot open config " + opt.config.string());
  json cfg = json::parse(f);
  const json train = cfg.value("train", json::object());
  opt.tc.lr = train.value("lr", opt.tc.lr);
  opt.tc.max_epochs = train.value("max_epochs", opt.tc.max_epochs);
  opt.tc.batch_size = train.value("batch_size", opt.tc.batch_size);
  opt.tc.patience = train.value("patience", opt.tc.patience);
  opt.tc.weight_decay = train.value("weight_decay", opt.tc.weight_decay);
  opt.tc.l2_reg = train.value("l2_reg", opt.tc.l2_reg);
  const json model = cfg.value("model", json::object());
  opt.levels = model.value("levels", opt.levels);
  opt.filters = model.value("filters", opt.filters);
}

std::vector<TrainExample> build_examples(const TrainOptions& opt) {
  Pullback pb = load_pullback(opt.pullback);
  std::vector<TrainExample> out;
  const int cols = pb.n_theta();
  const int windows = std::max(1, cols / opt.crop_cols);
  for (int f = 0; f < pb.n_frames(); ++f) {
    const fs::path mask_path = opt.masks / frame_name(opt.mask_prefix, f);
    if (!fs::exists(mask_path))
      throw std::runtime_error("missing mask " + mask_path.string());
    const Mask raw = load_mask_pgm(mask_path);
    if (raw.rows() != pb.n_r() || raw.cols() != cols)
      throw std::runtime_error("mask shape mismatch at " + mask_path.string());
    auto pf = preprocess_frame(pb.frames[f]);
    const Mask shifted = shift_mask(raw, pf.lumen);
    const int t0 = (f % windows) * opt.crop_cols;
    TrainExample ex;
    ex.image = ImageF(opt.crop_rows, opt.crop_cols);
    ex.target = Mask(opt.crop_rows, opt.crop_cols);
    for (int r = 0; r < opt.crop_rows; ++r)
      for (int t = 0; t < opt.crop_cols; ++t) {
        ex.image.at(r, t) = pf.data.at(r, t0 + t);
        ex.target.data.at(r, t) = shifted.data.at(r, t0 + t);
      }
    ex.pullback_id = pb.pullback_id + ":" + std::to_string(f);
    out.push_back(std::move(ex));
  }
  return out;
}

int run_training(TrainOptions opt) {
  apply_config(opt);
  opt.tc.validate();
  auto examples = build_examples(opt);
  const size_t n_val = std::max<size_t>(
      1, static_cast<size_t>(examples.size() * opt.val_fraction));
  if (examples.size() < n_val + 1)
    throw std::runtime_error("too few frames to split train/validation");
  std::vector<TrainExample> val(examples.end() - n_val, examples.end());
  examples.resize(examples.size() - n_val);

  SegResNet<float>::Config mc;
  mc.levels = opt.levels;
  mc.init_filters = opt.filters;
  FloatModel model(mc, opt.tc.seed);
  if (!opt.pretrained.empty()) {
    const auto report = transfer_init(model, opt.pretrained);
    std::cout << "transfer: " << report.matched.size() << " layers matched, "
              << report.randomly_initialized.size() << " randomly initialized\n";
  }

  auto [best, log] = fit(std::move(model), examples, val, opt.tc, true);

  fs::create_directories(opt.out);
  save_weights(best, opt.out / "weights.fcw");
  std::ofstream csv(opt.out / "trainlog.csv");
  csv << "epoch,train_loss,val_loss,wall_seconds\n";
  for (const auto& e : log.epochs)
    csv << e.epoch << "," << e.train_loss << "," << e.val_loss << ","
        << e.wall_seconds << "\n";
  json summary{{"stop_reason", log.stop_reason},
               {"epochs_to_best", log.epochs_to_best},
               {"best_val_loss", log.best_val_loss},
               {"levels", opt.levels},
               {"filters", opt.filters}};
  std::ofstream(opt.out / "train_summary.json") << summary.dump(2) << "\n";
  std::cout << "best val loss " << log.best_val_loss << " at epoch "
            << log.epochs_to_best << " (" << log.stop_reason << ")\n";
  return kExitOk;
}

// ---- segment ---------------------------------------------------------------

int cmd_segment(const fs::path& weights, const fs::path& pullback,
                const fs::path& out, int levels, int filters,
                const std::string& frames_spec) {
  Pullback pb = load_pullback(pullback);
  int f_lo = 0, f_hi = pb.n_frames();
  if (!frames_spec.empty()) {
    std::tie(f_lo, f_hi) = parse_frames(frames_spec);
    f_hi = std::min(f_hi, pb.n_frames());
    if (f_lo >= f_hi) throw std::runtime_error("--frames range is empty");
  }

  SegResNet<float>::Config mc;
  mc.levels = levels;
  mc.init_filters = filters;
  FloatModel model(mc, 0);
  load_weights(model, weights);

  fs::create_directories(out);
  const auto shadows = detect_guidewire_pullback(pb);
  std::vector<double> per_frame_s;
  json meta;
  for (int f = f_lo; f < f_hi; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto lumen = segment_lumen(pb.frames[f], shadows[f]);
    const auto shifted = pixel_shift(pb.frames[f], lumen, shadows[f]);
    const auto pf = crop_and_filter(shifted, lumen, shadows[f]);
    const ImageF prob = predict(model, pf.data);
    const Mask mask = postprocess_mask(binarize(prob));
    const auto t1 = std::chrono::steady_clock::now();
    save_mask_pgm(mask, out / frame_name("mask_", f));
    per_frame_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    json rec;
    rec["frame"] = f;
    rec["lumen"] = lumen_to_json(lumen);
    rec["shadow"] = shadow_to_json(shadows[f]);
    rec["seconds"] = per_frame_s.back();
    meta["frames"].push_back(rec);
  }

  auto sorted = per_frame_s;
  std::sort(sorted.begin(), sorted.end());
  const double mean =
      std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  const double p95 = sorted[static_cast<size_t>(0.95 * (sorted.size() - 1))];
  meta["timing"] = {{"mean_s", mean}, {"p95_s", p95}};
  std::ofstream(out / "segment.json") << meta.dump(2) << "\n";
  std::printf("segmented %d frames: mean %.3f s/frame, p95 %.3f s/frame\n",
              f_hi - f_lo, mean, p95);
  return kExitOk;
}

// ---- quantify ----------------------------------------------------------------

int cmd_quantify(const fs::path& masks_dir, const fs::path& pullback,
                 const fs::path& out) {
  Pullback pb = load_pullback(pullback);
  const fs::path seg_meta = masks_dir / "segment.json";
  if (!fs::exists(seg_meta))
    throw std::runtime_error("missing " + seg_meta.string() +
                             " (expected output of fibcap segment)");
  std::ifstream f(seg_meta);
  json meta = json::parse(f);

  std::vector<Mask> masks;
  std::vector<LumenBoundary> lumens;
  for (const auto& rec : meta.at("frames")) {
    const int fi = rec.at("frame").get<int>();
    masks.push_back(load_mask_pgm(masks_dir / frame_name("mask_", fi)));
    LumenBoundary lb;
    lb.r_index = rec.at("lumen").at("r_index").get<std::vector<int>>();
    for (bool v : rec.at("lumen").at("valid")) lb.valid.push_back(v);
    lumens.push_back(std::move(lb));
  }
  if (masks.empty()) throw std::runtime_error("no masks in " + masks_dir.string());

  const auto quant = quantify_pullback(masks, lumens, pb.geometry);
  export_heatmap(quant, lumens, pb.geometry, out);
  std::cout << "quantified " << masks.size() << " frames; min cap ";
  if (quant.min_cap_thickness_um)
    std::cout << *quant.min_cap_thickness_um << " um";
  else
    std::cout << "n/a";
  std::cout << (quant.tcfa ? " (TCFA)" : "") << "\n";
  return kExitOk;
}

// ---- evaluate -----------------------------------------------------------------

int cmd_evaluate(const fs::path& pred_dir, const fs::path& truth_dir,
                 const fs::path& out_json) {
  std::vector<fs::path> preds;
  for (const auto& e : fs::directory_iterator(pred_dir))
    if (e.path().extension() == ".pgm" &&
        e.path().filename().string().rfind("mask_", 0) == 0)
      preds.push_back(e.path());
  std::sort(preds.begin(), preds.end());
  if (preds.empty())
    throw std::runtime_error("no mask_*.pgm files in " + pred_dir.string());

  ConfusionCounts pooled;
  std::vector<MetricsEntry> per_frame;
  for (const auto& p : preds) {
    // truth file shares the frame number: mask_0007.pgm -> fc_0007.pgm
    const std::string num = p.stem().string().substr(5);
    const fs::path truth_path = truth_dir / ("fc_" + num + ".pgm");
    if (!fs::exists(truth_path))
      throw std::runtime_error("missing truth " + truth_path.string());
    const auto c = confusion(load_mask_pgm(p), load_mask_pgm(truth_path));
    pooled += c;
    per_frame.push_back(metrics(c));
  }

  auto entry_to_json = [](const MetricsEntry& e) {
    auto opt = [](const std::optional<double>& v) {
      return v ? json(*v) : json(nullptr);
    };
    return json{{"ppv", opt(e.ppv)},
                {"npv", opt(e.npv)},
                {"sensitivity", opt(e.sensitivity)},
                {"specificity", opt(e.specificity)},
                {"accuracy", opt(e.accuracy)},
                {"dice", opt(e.dice)}};
  };
  json result;
  result["n_frames"] = preds.size();
  result["micro"] = entry_to_json(metrics(pooled));
  for (const auto& e : per_frame) result["per_frame"].push_back(entry_to_json(e));

  fs::create_directories(out_json.parent_path().empty() ? "."
                                                        : out_json.parent_path());
  std::ofstream(out_json) << result.dump(2) << "\n";
  const auto micro = metrics(pooled);
  std::printf("micro dice %.4f over %zu frames\n",
              micro.dice ? *micro.dice : 0.0, preds.size());
  return kExitOk;
}

// ---- report --------------------------------------------------------------------

int cmd_report(const fs::path& run_dir, const fs::path& out) {
  json report;
  bool any = false;
  for (const char* name : {"metrics.json", "summary.json", "train_summary.json",
                           "segment.json"}) {
    const fs::path p = run_dir / name;
    if (!fs::exists(p)) {
      report["missing"].push_back(name);
      std::cerr << "warning: " << p << " absent; section skipped\n";
      continue;
    }
    std::ifstream f(p);
    try {
      report[fs::path(name).stem().string()] = json::parse(f);
      any = true;
    } catch (const json::parse_error& e) {
      std::cerr << "corrupt " << p << ": " << e.what() << "\n";
      return kExitData;
    }
  }
  if (!any) {
    std::cerr << "no report inputs found in " << run_dir << "\n";
    return kExitData;
  }
  std::ofstream(out) << report.dump(2) << "\n";
  std::cout << "report written to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fibrous-cap segmentation and quantification for IVOCT pullbacks"};
  app.require_subcommand(1);

  std::optional<uint64_t> seed;
  int threads = default_threads();
  app.add_option("--seed", seed, "global RNG seed");
  app.add_option("--threads", threads, "worker threads (env FIBCAP_THREADS)");

  // phantom
  auto* ph = app.add_subcommand("phantom", "generate a synthetic pullback suite");
  std::string ph_suite = "fc-test-16";
  fs::path ph_out;
  ph->add_option("--suite", ph_suite, "suite name");
  ph->add_option("--out", ph_out, "output directory")->required();

  // preprocess
  auto* pp = app.add_subcommand("preprocess", "lumen/shadow detection + shift + filter");
  fs::path pp_in, pp_out;
  pp->add_option("--in", pp_in, "input .ivp")->required();
  pp->add_option("--out", pp_out, "output directory")->required();

  // pretrain / train
  TrainOptions tr;
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--pullback", tr.pullback, "training pullback .ivp")->required();
    cmd->add_option("--masks", tr.masks, "directory of truth masks")->required();
    cmd->add_option("--out", tr.out, "run directory")->required();
    cmd->add_option("--config", tr.config, "experiment config JSON");
    cmd->add_option("--lr", tr.tc.lr, "learning rate");
    cmd->add_option("--epochs", tr.tc.max_epochs, "max epochs");
    cmd->add_option("--batch", tr.tc.batch_size, "batch size");
    cmd->add_option("--patience", tr.tc.patience, "early-stopping patience");
    cmd->add_option("--levels", tr.levels, "encoder levels");
    cmd->add_option("--filters", tr.filters, "initial filter count");
  };
  auto* pre = app.add_subcommand("pretrain", "train on the calcification task");
  add_train_flags(pre);
  auto* trn = app.add_subcommand("train", "train the fibrous-cap model");
  add_train_flags(trn);
  trn->add_option("--pretrained", tr.pretrained, "pretrained weights .fcw");

  // segment
  auto* sg = app.add_subcommand("segment", "run the model over a pullback");
  fs::path sg_weights, sg_pullback, sg_out;
  int sg_levels = 2, sg_filters = 8;
  std::string sg_frames;
  sg->add_option("--weights", sg_weights, "model weights .fcw")->required();
  sg->add_option("--pullback", sg_pullback, "input .ivp")->required();
  sg->add_option("--out", sg_out, "output directory")->required();
  sg->add_option("--levels", sg_levels, "encoder levels");
  sg->add_option("--filters", sg_filters, "initial filter count");
  sg->add_option("--frames", sg_frames, "half-open frame range a..b");

  // quantify
  auto* qt = app.add_subcommand("quantify", "cap thickness / arc / area / TCFA");
  fs::path qt_masks, qt_pullback, qt_out;
  qt->add_option("--masks", qt_masks, "segment output directory")->required();
  qt->add_option("--pullback", qt_pullback, "source .ivp")->required();
  qt->add_option("--out", qt_out, "report directory")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "pixel metrics against truth masks");
  fs::path ev_pred, ev_truth, ev_out = "metrics.json";
  ev->add_option("--pred", ev_pred, "predicted mask directory")->required();
  ev->add_option("--truth", ev_truth, "truth mask directory")->required();
  ev->add_option("--out", ev_out, "output metrics JSON");

  // report
  auto* rp = app.add_subcommand("report", "consolidate run artifacts");
  fs::path rp_run, rp_out = "report.json";
  rp->add_option("--run", rp_run, "run directory")->required();
  rp->add_option("--out", rp_out, "output report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ph) return cmd_phantom(ph_suite, ph_out, seed);
    if (*pp) return cmd_preprocess(pp_in, pp_out);
    if (*pre || *trn) {
      tr.mask_prefix = *pre ? "cal_" : "fc_";
      if (seed) tr.tc.seed = *seed;
      tr.tc.threads = threads;
      return run_training(tr);
    }
    if (*sg) return cmd_segment(sg_weights, sg_pullback, sg_out, sg_levels,
                                sg_filters, sg_frames);
    if (*qt) return cmd_quantify(qt_masks, qt_pullback, qt_out);
    if (*ev) return cmd_evaluate(ev_pred, ev_truth, ev_out);
    if (*rp) return cmd_report(rp_run, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    if (what.find("non-finite") != std::string::npos ||
        what.find("NaN") != std::string::npos)
      return kExitNumeric;
    return kExitData;
  }
  return kExitUsage;
}
