// xstab command-line tool. Talks to the shared library exclusively through
// the public C API so it doubles as a smoke test of that surface.
#include <CLI11.hpp>

#include <xstab/xstab.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

int finish(xstab_status st) {
  if (st == XSTAB_OK) return kExitOk;
  std::fprintf(stderr, "xstab: %s: %s\n", xstab_status_name(st), xstab_last_error());
  return st == XSTAB_E_CONFIG ? kExitConfig : kExitData;
}

struct ImageDeleter {
  void operator()(xstab_image* p) const { xstab_image_free(p); }
};
struct MapDeleter {
  void operator()(xstab_map* p) const { xstab_map_free(p); }
};
struct ModelDeleter {
  void operator()(xstab_model* p) const { xstab_model_free(p); }
};
using ImagePtr = std::unique_ptr<xstab_image, ImageDeleter>;
using MapPtr = std::unique_ptr<xstab_map, MapDeleter>;
using ModelPtr = std::unique_ptr<xstab_model, ModelDeleter>;

struct DistortArgs {
  std::string images, specs, out;
};

struct GfdmArgs {
  std::string fixations, image_id, out, overlay, base_image;
  std::size_t width = 0, height = 0;
  double sigma = 0.0;
};

struct ExplainArgs {
  std::string model_dir, image, method = "fem", out, overlay, save_model;
  std::size_t train_epochs = 0, train_samples = 300;
  double lr = 0.05, fem_k = 1.0;
  std::uint64_t train_seed = 0;
  std::size_t out_w = 0, out_h = 0;
  std::vector<double> weights;
};

struct EvaluateArgs {
  std::string config, out;
  std::int64_t seed = -1;
};

struct ReportArgs {
  std::string report, out;
};

int run_distort(const DistortArgs& a) {
  return finish(xstab_generate_corpus(a.images.c_str(), a.specs.c_str(), a.out.c_str()));
}

int run_gfdm(const GfdmArgs& a) {
  xstab_map* raw = nullptr;
  xstab_status st = xstab_gfdm(a.fixations.c_str(), a.image_id.c_str(), a.width, a.height,
                               a.sigma, &raw);
  if (st != XSTAB_OK) return finish(st);
  MapPtr map(raw);
  st = xstab_map_save_npy(map.get(), a.out.c_str());
  if (st != XSTAB_OK) return finish(st);
  if (!a.overlay.empty()) {
    ImagePtr base;
    if (!a.base_image.empty()) {
      xstab_image* img = nullptr;
      st = xstab_image_load(a.base_image.c_str(), &img);
      if (st != XSTAB_OK) return finish(st);
      base.reset(img);
    }
    st = xstab_map_save_heatmap(map.get(), base.get(), a.overlay.c_str());
    if (st != XSTAB_OK) return finish(st);
  }
  return kExitOk;
}

int run_explain(const ExplainArgs& a) {
  ModelPtr model;
  {
    xstab_model* raw = nullptr;
    xstab_status st = a.model_dir.empty()
                          ? xstab_model_train_toy(a.train_epochs, a.lr, a.train_samples,
                                                  a.train_seed, &raw)
                          : xstab_model_load(a.model_dir.c_str(), &raw);
    if (st != XSTAB_OK) return finish(st);
    model.reset(raw);
  }
  if (!a.save_model.empty()) {
    const xstab_status st = xstab_model_save(model.get(), a.save_model.c_str());
    if (st != XSTAB_OK) return finish(st);
  }

  ImagePtr image;
  {
    xstab_image* raw = nullptr;
    const xstab_status st = xstab_image_load(a.image.c_str(), &raw);
    if (st != XSTAB_OK) return finish(st);
    image.reset(raw);
  }
  const std::size_t out_w = a.out_w ? a.out_w : xstab_image_width(image.get());
  const std::size_t out_h = a.out_h ? a.out_h : xstab_image_height(image.get());

  MapPtr map;
  {
    xstab_map* raw = nullptr;
    const double* w = a.weights.empty() ? nullptr : a.weights.data();
    const xstab_status st = xstab_explain(model.get(), image.get(), a.method.c_str(), a.fem_k,
                                          w, a.weights.size(), out_w, out_h, &raw);
    if (st != XSTAB_OK) return finish(st);
    map.reset(raw);
  }
  xstab_status st = xstab_map_save_npy(map.get(), a.out.c_str());
  if (st != XSTAB_OK) return finish(st);
  if (!a.overlay.empty()) {
    st = xstab_map_save_heatmap(map.get(), image.get(), a.overlay.c_str());
    if (st != XSTAB_OK) return finish(st);
  }

  std::size_t label = 0;
  st = xstab_model_classify(model.get(), image.get(), &label);
  if (st != XSTAB_OK) return finish(st);
  std::printf("label=%zu map=%s\n", label, a.out.c_str());
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a) {
  return finish(xstab_evaluate(a.config.c_str(), a.out.empty() ? nullptr : a.out.c_str(),
                               a.seed));
}

int run_report(const ReportArgs& a) {
  return finish(xstab_report_csvs(a.report.c_str(), a.out.c_str()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stability evaluation of saliency-map explainers"};
  app.set_version_flag("--version", xstab_version());
  app.require_subcommand(1);

  DistortArgs distort_args;
  auto* distort = app.add_subcommand(
      "distort", "Materialize the distortion grid for every image in a directory");
  distort->add_option("--images", distort_args.images, "Directory of .png/.ppm source images")
      ->required();
  distort->add_option("--specs", distort_args.specs,
                      "JSON distortion specs (array or {\"distortions\": [...]})")
      ->required();
  distort->add_option("--out", distort_args.out, "Output corpus directory")->required();

  GfdmArgs gfdm_args;
  auto* gfdm = app.add_subcommand(
      "gfdm", "Render the gaze-fixation density map for one image id");
  gfdm->add_option("--fixations", gfdm_args.fixations, "Fixation CSV or JSON file")->required();
  gfdm->add_option("--image-id", gfdm_args.image_id, "Image id to select")->required();
  gfdm->add_option("--width", gfdm_args.width, "Map width in pixels")->required();
  gfdm->add_option("--height", gfdm_args.height, "Map height in pixels")->required();
  gfdm->add_option("--sigma", gfdm_args.sigma, "Foveal Gaussian sigma (<= 0: width/20)");
  gfdm->add_option("--out", gfdm_args.out, "Output .npy path")->required();
  gfdm->add_option("--overlay", gfdm_args.overlay, "Optional heat-map PNG path");
  gfdm->add_option("--image", gfdm_args.base_image,
                   "Base image blended under --overlay (omit for plain heat map)");

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Compute one explanation map for one image");
  auto* model_opt =
      explain->add_option("--model", explain_args.model_dir, "Directory of a saved model");
  auto* train_opt = explain->add_option("--train-toy", explain_args.train_epochs,
                                        "Train the built-in model for N epochs instead");
  model_opt->excludes(train_opt);
  explain->add_option("--train-samples", explain_args.train_samples,
                      "Synthetic training-set size for --train-toy");
  explain->add_option("--lr", explain_args.lr, "Learning rate for --train-toy");
  explain->add_option("--train-seed", explain_args.train_seed, "Seed for --train-toy");
  explain->add_option("--save-model", explain_args.save_model,
                      "Save the (trained or loaded) model to this directory");
  explain->add_option("--image", explain_args.image, "Input image (.png/.ppm)")->required();
  explain->add_option("--method", explain_args.method, "fem, gradcam, or mlfem")
      ->check(CLI::IsMember({"fem", "gradcam", "mlfem"}));
  explain->add_option("--fem-k", explain_args.fem_k, "FEM threshold multiplier K");
  explain->add_option("--weights", explain_args.weights,
                      "mlfem per-layer fusion weights (default: uniform)");
  explain->add_option("--width", explain_args.out_w, "Map width (default: image width)");
  explain->add_option("--height", explain_args.out_h, "Map height (default: image height)");
  explain->add_option("--out", explain_args.out, "Output .npy path")->required();
  explain->add_option("--overlay", explain_args.overlay, "Optional heat-map overlay PNG path");

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand(
      "evaluate", "Run the full generate/classify/explain/score pipeline from a config");
  evaluate->add_option("--config", evaluate_args.config, "Run-config JSON file")->required();
  evaluate->add_option("--out", evaluate_args.out, "Output directory (overrides config)");
  evaluate->add_option("--seed", evaluate_args.seed,
                       "Master seed override (negative: keep config value)");

  ReportArgs report_args;
  auto* report =
      app.add_subcommand("report", "Regenerate the CSV tables from an existing report.json");
  report->add_option("--report", report_args.report, "report.json path")->required();
  report->add_option("--out", report_args.out, "Output directory for the CSVs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (distort->parsed()) return run_distort(distort_args);
  if (gfdm->parsed()) return run_gfdm(gfdm_args);
  if (explain->parsed()) {
    if (explain_args.model_dir.empty() && explain_args.train_epochs == 0) {
      std::fprintf(stderr, "xstab: explain needs --model or --train-toy\n");
      return kExitConfig;
    }
    return run_explain(explain_args);
  }
  if (evaluate->parsed()) return run_evaluate(evaluate_args);
  if (report->parsed()) return run_report(report_args);
  return kExitConfig;
}
