#include "pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "core/rng.hpp"
#include "distort/corpus.hpp"
#include "error.hpp"
#include "metrics/metrics.hpp"
#include "model/synth.hpp"
#include "version.hpp"

namespace xstab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const char* lipschitz_aggregation_name(LipschitzAggregation a) {
  return a == LipschitzAggregation::Max ? "max" : "per_variant";
}

LipschitzAggregation lipschitz_aggregation_from_name(std::string_view s) {
  if (s == "max") return LipschitzAggregation::Max;
  if (s == "per_variant") return LipschitzAggregation::PerVariant;
  fail(Err::Config, "unknown lipschitz_aggregation: " + std::string(s));
}

const char* cluster_name(Cluster c) { return c == Cluster::Well ? "well" : "badly"; }

namespace {

const std::vector<std::string>& known_explainers() {
  static const std::vector<std::string> names = {"fem", "mlfem", "gradcam"};
  return names;
}

}  // namespace

void RunConfig::validate() const {
  if (explainers.empty()) fail(Err::Config, "config: empty explainer list");
  std::set<std::string> seen;
  for (const auto& e : explainers) {
    const auto& known = known_explainers();
    if (std::find(known.begin(), known.end(), e) == known.end()) {
      fail(Err::Config, "config: unknown explainer '" + e + "'");
    }
    if (!seen.insert(e).second) fail(Err::Config, "config: duplicate explainer '" + e + "'");
  }
  if (distortions.empty()) fail(Err::Config, "config: empty distortion list");
  std::set<std::string> families;
  for (const auto& spec : distortions) {
    try {
      spec.validate();
    } catch (const Error& e) {
      fail(Err::Config, std::string("config: bad distortion spec: ") + e.what());
    }
    if (!families.insert(family_name(spec.family)).second) {
      fail(Err::Config, std::string("config: duplicate distortion family '") +
                            family_name(spec.family) + "'");
    }
  }
  try {
    fem_params.validate();
  } catch (const Error& e) {
    fail(Err::Config, std::string("config: ") + e.what());
  }
  if (!std::isfinite(sigma_fov) || sigma_fov < 0.0) {
    fail(Err::Config, "config: sigma_fov must be finite and >= 0");
  }
  if (train_toy) {
    if (train_toy->epochs == 0) fail(Err::Config, "config: train_toy.epochs must be >= 1");
    if (train_toy->samples == 0) fail(Err::Config, "config: train_toy.samples must be >= 1");
    if (!std::isfinite(train_toy->lr) || train_toy->lr < 0.0) {
      fail(Err::Config, "config: train_toy.lr must be finite and >= 0");
    }
  } else {
    if (model_path.empty()) fail(Err::Config, "config: need either a model path or train_toy");
    if (!fs::exists(model_path)) {
      fail(Err::Config, "config: model path does not exist: " + model_path.string());
    }
  }
  if (image_dir.empty() || !fs::is_directory(image_dir)) {
    fail(Err::Config, "config: image_dir is not a directory: " + image_dir.string());
  }
  if (fixation_path.empty() || !fs::exists(fixation_path)) {
    fail(Err::Config, "config: fixation file does not exist: " + fixation_path.string());
  }
  if (out_dir.empty()) fail(Err::Config, "config: empty output dir");
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.image_dir = j.at("image_dir").get<std::string>();
    c.fixation_path = j.at("fixations").get<std::string>();
    if (j.contains("model") && !j["model"].is_null()) {
      c.model_path = j["model"].get<std::string>();
    }
    if (j.contains("train_toy") && !j["train_toy"].is_null()) {
      TrainToy t;
      const auto& tj = j["train_toy"];
      if (tj.contains("epochs")) t.epochs = tj["epochs"].get<std::size_t>();
      if (tj.contains("lr")) t.lr = tj["lr"].get<double>();
      if (tj.contains("samples")) t.samples = tj["samples"].get<std::size_t>();
      c.train_toy = t;
    }
    c.explainers = j.at("explainers").get<std::vector<std::string>>();
    for (const auto& sj : j.at("distortions")) c.distortions.push_back(spec_from_json(sj));
    if (j.contains("fem_k")) c.fem_params.k = j["fem_k"].get<double>();
    if (j.contains("sigma_fov")) c.sigma_fov = j["sigma_fov"].get<double>();
    if (j.contains("lipschitz_aggregation")) {
      c.lipschitz_aggregation =
          lipschitz_aggregation_from_name(j["lipschitz_aggregation"].get<std::string>());
    }
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Config, std::string("bad config: ") + e.what());
  }
  return c;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["image_dir"] = c.image_dir.generic_string();
  j["fixations"] = c.fixation_path.generic_string();
  if (c.model_path.empty())
    j["model"] = nullptr;
  else
    j["model"] = c.model_path.generic_string();
  if (c.train_toy) {
    j["train_toy"] = {{"epochs", c.train_toy->epochs},
                      {"lr", c.train_toy->lr},
                      {"samples", c.train_toy->samples}};
  } else {
    j["train_toy"] = nullptr;
  }
  j["explainers"] = c.explainers;
  j["distortions"] = ordered_json::array();
  for (const auto& spec : c.distortions) j["distortions"].push_back(spec_to_json(spec));
  j["fem_k"] = c.fem_params.k;
  j["sigma_fov"] = c.sigma_fov;
  j["lipschitz_aggregation"] = lipschitz_aggregation_name(c.lipschitz_aggregation);
  j["out_dir"] = c.out_dir.generic_string();
  j["seed"] = c.seed;
  return j;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(Err::Config, "cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Config, "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

LevelStats aggregate(const std::vector<double>& values) {
  if (values.empty()) fail(Err::EmptyLevel, "aggregate: level has no samples");
  LevelStats s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    ss += d * d;
  }
  s.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

namespace {

class FemExplainer final : public Explainer {
 public:
  FemExplainer(const ToyModel& model, FemParams params, std::size_t out_w, std::size_t out_h)
      : model_(&model), params_(params), out_w_(out_w), out_h_(out_h) {}
  std::string name() const override { return "fem"; }
  SaliencyMap explain(const Image& img) const override {
    const Image in = resize_image_bilinear(img, model_->input_h, model_->input_w);
    const ForwardCache cache = forward(*model_, in);
    return fem(cache.activations.back(), params_, out_w_, out_h_);
  }

 private:
  const ToyModel* model_;
  FemParams params_;
  std::size_t out_w_, out_h_;
};

class GradcamExplainer final : public Explainer {
 public:
  GradcamExplainer(const ToyModel& model, std::size_t out_w, std::size_t out_h)
      : model_(&model), out_w_(out_w), out_h_(out_h) {}
  std::string name() const override { return "gradcam"; }
  SaliencyMap explain(const Image& img) const override {
    const Image in = resize_image_bilinear(img, model_->input_h, model_->input_w);
    const ForwardCache cache = forward(*model_, in);
    const std::size_t last = model_->n_layers() - 1;
    const ActivationTensor grad = grad_wrt_activation(*model_, cache, cache.label, last);
    return gradcam(cache.activations.back(), grad, out_w_, out_h_);
  }

 private:
  const ToyModel* model_;
  std::size_t out_w_, out_h_;
};

class MlfemExplainer final : public Explainer {
 public:
  MlfemExplainer(const ToyModel& model, FemParams params, FusionWeights weights,
                 std::size_t out_w, std::size_t out_h)
      : model_(&model), params_(params), weights_(std::move(weights)), out_w_(out_w),
        out_h_(out_h) {}
  std::string name() const override { return "mlfem"; }
  SaliencyMap explain(const Image& img) const override {
    const Image in = resize_image_bilinear(img, model_->input_h, model_->input_w);
    const ForwardCache cache = forward(*model_, in);
    return mlfem(mlfem_layer_maps(cache, params_, out_w_, out_h_), weights_);
  }

 private:
  const ToyModel* model_;
  FemParams params_;
  FusionWeights weights_;
  std::size_t out_w_, out_h_;
};

}  // namespace

std::unique_ptr<Explainer> make_fem_explainer(const ToyModel& model, FemParams params,
                                              std::size_t out_w, std::size_t out_h) {
  return std::make_unique<FemExplainer>(model, params, out_w, out_h);
}

std::unique_ptr<Explainer> make_gradcam_explainer(const ToyModel& model, std::size_t out_w,
                                                  std::size_t out_h) {
  return std::make_unique<GradcamExplainer>(model, out_w, out_h);
}

std::unique_ptr<Explainer> make_mlfem_explainer(const ToyModel& model, FemParams params,
                                                FusionWeights weights, std::size_t out_w,
                                                std::size_t out_h) {
  return std::make_unique<MlfemExplainer>(model, params, std::move(weights), out_w, out_h);
}

std::size_t threads_from_env() {
  const char* env = std::getenv("XSTAB_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (!end || *end != '\0') {
    fail(Err::Config, std::string("XSTAB_THREADS is not a number: ") + env);
  }
  return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

// Everything recorded for one distorted variant; explainer-indexed vectors.
struct VariantOutcome {
  Cluster cluster = Cluster::Well;
  bool identical = false;  // zero image distance: no Lipschitz ratio
  std::vector<double> ratio;
  std::vector<std::optional<double>> pcc_v;
  std::vector<std::optional<double>> sim_v;
};

std::optional<double> try_pcc(const SaliencyMap& a, const SaliencyMap& b) {
  try {
    return pcc(a, b);
  } catch (const Error& e) {
    if (e.code() == Err::ZeroVariance) return std::nullopt;
    throw;
  }
}

std::optional<double> try_sim(const SaliencyMap& a, const SaliencyMap& b) {
  try {
    return sim(a, b);
  } catch (const Error& e) {
    if (e.code() == Err::ZeroMass) return std::nullopt;
    throw;
  }
}

std::optional<double> try_stability_step(double base, double next_value) {
  try {
    return stability_series({base, next_value}).front();
  } catch (const Error& e) {
    if (e.code() == Err::ZeroBaseline) return std::nullopt;
    throw;
  }
}

std::optional<double> try_consensus(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return std::nullopt;
  try {
    return consensus(a, b);
  } catch (const Error& e) {
    if (e.code() == Err::ZeroVariance) return std::nullopt;
    throw;
  }
}

}  // namespace

EvaluationReport evaluate_core(const EvaluationInputs& in) {
  const std::size_t n_images = in.images.size();
  if (n_images == 0) fail(Err::EmptyDataset, "evaluate: no images");
  if (in.ids.size() != n_images || in.gfdms.size() != n_images) {
    fail(Err::ShapeMismatch, "evaluate: ids/images/gfdms length mismatch");
  }
  if (in.explainers.empty()) fail(Err::Config, "evaluate: no explainers");
  if (in.distortions.empty()) fail(Err::Config, "evaluate: no distortions");
  if (!in.classify) fail(Err::Config, "evaluate: no classifier");
  const std::size_t n_explainers = in.explainers.size();
  const std::size_t n_families = in.distortions.size();

  EvaluationReport report;

  // Reference label and clean explanation map per image, computed once.
  std::vector<std::size_t> labels(n_images);
  std::vector<std::vector<SaliencyMap>> clean(n_explainers,
                                              std::vector<SaliencyMap>(n_images));
  parallel_for(n_images, in.threads, [&](std::size_t i) {
    labels[i] = in.classify(in.images[i]);
    for (std::size_t e = 0; e < n_explainers; ++e) {
      clean[e][i] = in.explainers[e]->explain(in.images[i]);
    }
  });
  for (std::size_t i = 0; i < n_images; ++i) report.images.emplace_back(in.ids[i], labels[i]);

  // One outcome grid per family, indexed (image, level, variant).
  std::vector<std::vector<VariantOutcome>> records(n_families);
  for (std::size_t f = 0; f < n_families; ++f) {
    const auto& spec = in.distortions[f];
    records[f].resize(n_images * spec.levels.size() * spec.variant_count());
  }

  parallel_for(n_images * n_families, in.threads, [&](std::size_t unit) {
    const std::size_t i = unit / n_families;
    const std::size_t f = unit % n_families;
    const auto& spec = in.distortions[f];
    const std::size_t m = spec.variant_count();
    const auto variants = generate_distortion_set(in.images[i], in.ids[i], spec);
    for (const auto& dv : variants) {
      try {
        VariantOutcome& rec = records[f][(i * spec.levels.size() + dv.level_index) * m +
                                         dv.variant_index];
        rec.cluster = cluster_of(labels[i], in.classify(dv.image));
        rec.ratio.resize(n_explainers, 0.0);
        rec.pcc_v.resize(n_explainers);
        rec.sim_v.resize(n_explainers);
        for (std::size_t e = 0; e < n_explainers; ++e) {
          const SaliencyMap map_v = in.explainers[e]->explain(dv.image);
          rec.pcc_v[e] = try_pcc(map_v, in.gfdms[i]);
          rec.sim_v[e] = try_sim(map_v, in.gfdms[i]);
          if (!rec.identical) {
            try {
              rec.ratio[e] = lipschitz_ratio(in.images[i], dv.image, clean[e][i], map_v);
            } catch (const Error& err) {
              if (err.code() != Err::IdenticalInputs) throw;
              rec.identical = true;
            }
          }
        }
      } catch (const Error& err) {
        fail(err.code(), std::string(err.what()) + " [image=" + in.ids[i] +
                             ", family=" + family_name(spec.family) +
                             ", level=" + level_dir_name(dv.level) +
                             ", variant=" + std::to_string(dv.variant_index) + "]");
      }
    }
  });

  // Single-threaded reduction in (image, level, variant) order.
  for (std::size_t e = 0; e < n_explainers; ++e) {
    ExplainerResult er;
    er.explainer = in.explainers[e]->name();
    for (std::size_t f = 0; f < n_families; ++f) {
      const auto& spec = in.distortions[f];
      const std::size_t n_levels = spec.levels.size();
      const std::size_t m = spec.variant_count();
      FamilyResult fr;
      fr.family = family_name(spec.family);
      fr.levels = spec.levels;
      for (const auto& rec : records[f]) {
        if (rec.identical) ++fr.skipped;
      }
      for (Cluster c : {Cluster::Well, Cluster::Badly}) {
        ClusterBlock block;
        for (std::size_t li = 0; li < n_levels; ++li) {
          std::vector<double> l_values, pcc_values, sim_values;
          for (std::size_t i = 0; i < n_images; ++i) {
            double image_max = 0.0;
            bool image_has = false;
            for (std::size_t vi = 0; vi < m; ++vi) {
              const auto& rec = records[f][(i * n_levels + li) * m + vi];
              if (rec.cluster != c) continue;
              if (rec.pcc_v[e]) pcc_values.push_back(*rec.pcc_v[e]);
              if (rec.sim_v[e]) sim_values.push_back(*rec.sim_v[e]);
              if (rec.identical) continue;
              if (in.aggregation == LipschitzAggregation::PerVariant) {
                l_values.push_back(rec.ratio[e]);
              } else {
                image_max = image_has ? std::max(image_max, rec.ratio[e]) : rec.ratio[e];
                image_has = true;
              }
            }
            if (in.aggregation == LipschitzAggregation::Max && image_has) {
              l_values.push_back(image_max);
            }
          }
          auto cell = [](const std::vector<double>& values) -> std::optional<LevelStats> {
            if (values.empty()) return std::nullopt;
            return aggregate(values);
          };
          block.l.push_back(cell(l_values));
          block.pcc.push_back(cell(pcc_values));
          block.sim.push_back(cell(sim_values));
        }
        for (std::size_t li = 0; li + 1 < n_levels; ++li) {
          if (block.l[li] && block.l[li + 1]) {
            block.stability.push_back(
                try_stability_step(block.l[li]->mean, block.l[li + 1]->mean));
          } else {
            block.stability.push_back(std::nullopt);
          }
        }
        auto paired_consensus = [&](const std::vector<std::optional<LevelStats>>& a,
                                    const std::vector<std::optional<LevelStats>>& b) {
          std::vector<double> va, vb;
          for (std::size_t li = 0; li < n_levels; ++li) {
            if (a[li] && b[li]) {
              va.push_back(a[li]->mean);
              vb.push_back(b[li]->mean);
            }
          }
          return try_consensus(va, vb);
        };
        block.l_to_pcc = paired_consensus(block.l, block.pcc);
        block.l_to_sim = paired_consensus(block.l, block.sim);
        block.pcc_to_sim = paired_consensus(block.pcc, block.sim);
        (c == Cluster::Well ? fr.well : fr.badly) = std::move(block);
      }
      er.families.push_back(std::move(fr));
    }
    report.results.push_back(std::move(er));
  }
  for (const auto& fr : report.results.front().families) report.skipped_variants += fr.skipped;
  return report;
}

EvaluationReport run_evaluation(const RunConfig& config) {
  config.validate();

  // Model: load, or train the built-in one on the synthetic-shapes set.
  ToyModel model;
  if (config.train_toy) {
    const auto dataset =
        synth_dataset(config.train_toy->samples, mix_seed(config.seed, fnv1a64("train-data")));
    const ToyModel base = make_toy_model(mix_seed(config.seed, fnv1a64("model-init")));
    model = train(base, dataset, config.train_toy->epochs, config.train_toy->lr,
                  mix_seed(config.seed, fnv1a64("train")));
  } else {
    model = load_model(config.model_path);
  }

  // Images, sorted by filename for a deterministic order.
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(config.image_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    fail(Err::EmptyDataset, "no .png/.ppm images in " + config.image_dir.string());
  }
  EvaluationInputs in;
  for (const auto& p : files) {
    in.ids.push_back(p.stem().string());
    in.images.push_back(load_image(p));
    if (in.images.back().height != in.images.front().height ||
        in.images.back().width != in.images.front().width) {
      fail(Err::Data, "images must share one resolution; " + p.string() + " differs");
    }
  }
  const std::size_t img_w = in.images.front().width;
  const std::size_t img_h = in.images.front().height;

  // Ground-truth gaze density maps.
  const auto fixation_sets = load_fixations(config.fixation_path, img_w, img_h);
  const double sigma =
      config.sigma_fov > 0.0 ? config.sigma_fov : default_sigma_fov(img_w);
  std::map<std::string, const FixationSet*> by_id;
  for (const auto& s : fixation_sets) by_id[s.image_id] = &s;
  in.gfdms.resize(in.images.size());
  for (std::size_t i = 0; i < in.ids.size(); ++i) {
    const auto it = by_id.find(in.ids[i]);
    if (it == by_id.end()) fail(Err::Data, "no fixations for image '" + in.ids[i] + "'");
    in.gfdms[i] = gfdm(*it->second, sigma);
  }

  // Explainers; the layer-fusion weights are fit once on the clean images.
  std::vector<std::unique_ptr<Explainer>> owned;
  for (const auto& name : config.explainers) {
    if (name == "fem") {
      owned.push_back(make_fem_explainer(model, config.fem_params, img_w, img_h));
    } else if (name == "gradcam") {
      owned.push_back(make_gradcam_explainer(model, img_w, img_h));
    } else {
      std::vector<std::vector<SaliencyMap>> per_image(in.images.size());
      parallel_for(in.images.size(), threads_from_env(), [&](std::size_t i) {
        const Image resized = resize_image_bilinear(in.images[i], model.input_h, model.input_w);
        per_image[i] =
            mlfem_layer_maps(forward(model, resized), config.fem_params, img_w, img_h);
      });
      const FusionWeights weights = fit_fusion_weights(per_image, in.gfdms);
      owned.push_back(
          make_mlfem_explainer(model, config.fem_params, weights, img_w, img_h));
    }
  }
  for (const auto& e : owned) in.explainers.push_back(e.get());

  in.distortions = config.distortions;
  for (auto& spec : in.distortions) {
    spec.seed = mix_seed(mix_seed(config.seed, fnv1a64(family_name(spec.family))), spec.seed);
  }
  in.aggregation = config.lipschitz_aggregation;
  in.threads = threads_from_env();
  in.classify = [&model](const Image& img) {
    return forward(model, resize_image_bilinear(img, model.input_h, model.input_w)).label;
  };

  EvaluationReport report = evaluate_core(in);
  report.seed = config.seed;
  report.config_echo = config_to_json(config);
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(report.config_echo.dump())));
  report.config_hash = digest;
  return report;
}

namespace {

ordered_json stats_json(const std::optional<LevelStats>& s) {
  if (!s) return nullptr;
  return ordered_json{{"mean", s->mean}, {"std", s->stddev}, {"count", s->count}};
}

ordered_json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

ordered_json cluster_json(const ClusterBlock& b) {
  ordered_json j;
  j["l"] = ordered_json::array();
  j["pcc"] = ordered_json::array();
  j["sim"] = ordered_json::array();
  for (const auto& s : b.l) j["l"].push_back(stats_json(s));
  for (const auto& s : b.pcc) j["pcc"].push_back(stats_json(s));
  for (const auto& s : b.sim) j["sim"].push_back(stats_json(s));
  j["stability"] = ordered_json::array();
  for (const auto& s : b.stability) j["stability"].push_back(opt_json(s));
  j["consensus"] = ordered_json{{"l_pcc", opt_json(b.l_to_pcc)},
                                {"l_sim", opt_json(b.l_to_sim)},
                                {"pcc_sim", opt_json(b.pcc_to_sim)}};
  return j;
}

std::string num_csv(const nlohmann::json& v) {
  return v.is_null() ? std::string() : v.dump();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(Err::Io, "write failed: " + path.string());
}

}  // namespace

ordered_json report_to_json(const EvaluationReport& report) {
  ordered_json j;
  j["tool"] = "xstab";
  j["version"] = kVersion;
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  j["config"] = report.config_echo.is_null() ? ordered_json::object()
                                             : report.config_echo;
  j["images"] = ordered_json::array();
  for (const auto& [id, label] : report.images) {
    j["images"].push_back(ordered_json{{"id", id}, {"label", label}});
  }
  j["skipped_variants"] = report.skipped_variants;
  j["results"] = ordered_json::array();
  for (const auto& er : report.results) {
    ordered_json ej;
    ej["explainer"] = er.explainer;
    ej["families"] = ordered_json::array();
    for (const auto& fr : er.families) {
      ordered_json fj;
      fj["family"] = fr.family;
      fj["levels"] = fr.levels;
      fj["skipped"] = fr.skipped;
      fj["clusters"] =
          ordered_json{{"well", cluster_json(fr.well)}, {"badly", cluster_json(fr.badly)}};
      ej["families"].push_back(std::move(fj));
    }
    j["results"].push_back(std::move(ej));
  }
  return j;
}

void write_report_csvs(const nlohmann::json& report_json, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto& results = report_json.at("results");
  if (results.empty()) fail(Err::Config, "report has no results");
  static const char* clusters[2] = {"well", "badly"};

  // Consensus table: one row block per family, rows = cluster x explainer.
  std::string consensus_csv = "family,cluster,explainer,L->PCC,L->SIM,PCC->SIM\n";
  const std::size_t n_families = results.at(0).at("families").size();
  for (std::size_t f = 0; f < n_families; ++f) {
    for (const char* cl : clusters) {
      for (const auto& er : results) {
        const auto& fj = er.at("families").at(f);
        const auto& cj = fj.at("clusters").at(cl).at("consensus");
        consensus_csv += fj.at("family").get<std::string>();
        consensus_csv += ',';
        consensus_csv += cl;
        consensus_csv += ',';
        consensus_csv += er.at("explainer").get<std::string>();
        consensus_csv += ',';
        consensus_csv += num_csv(cj.at("l_pcc"));
        consensus_csv += ',';
        consensus_csv += num_csv(cj.at("l_sim"));
        consensus_csv += ',';
        consensus_csv += num_csv(cj.at("pcc_sim"));
        consensus_csv += '\n';
      }
    }
  }
  write_text(out_dir / "consensus.csv", consensus_csv);

  static const char* metrics_keys[3] = {"l", "pcc", "sim"};
  for (const auto& er : results) {
    const std::string explainer = er.at("explainer").get<std::string>();
    for (const auto& fj : er.at("families")) {
      const std::string family = fj.at("family").get<std::string>();
      const auto& levels = fj.at("levels");

      for (const char* metric : metrics_keys) {
        std::string csv = "level,cluster,mean,std,count\n";
        for (std::size_t li = 0; li < levels.size(); ++li) {
          for (const char* cl : clusters) {
            const auto& cell = fj.at("clusters").at(cl).at(metric).at(li);
            csv += num_csv(levels.at(li));
            csv += ',';
            csv += cl;
            csv += ',';
            if (cell.is_null()) {
              csv += ",,";
            } else {
              csv += num_csv(cell.at("mean"));
              csv += ',';
              csv += num_csv(cell.at("std"));
              csv += ',';
              csv += num_csv(cell.at("count"));
            }
            csv += '\n';
          }
        }
        write_text(out_dir / ("series_" + std::string(metric) + "_" + family + "_" +
                              explainer + ".csv"),
                   csv);
      }

      std::string csv = "level_pair,cluster,s_percent\n";
      for (std::size_t li = 0; li + 1 < levels.size(); ++li) {
        for (const char* cl : clusters) {
          const auto& cell = fj.at("clusters").at(cl).at("stability").at(li);
          csv += level_dir_name(levels.at(li).get<double>());
          csv += "->";
          csv += level_dir_name(levels.at(li + 1).get<double>());
          csv += ',';
          csv += cl;
          csv += ',';
          csv += num_csv(cell);
          csv += '\n';
        }
      }
      write_text(out_dir / ("stability_" + family + "_" + explainer + ".csv"), csv);
    }
  }
}

void write_report(const EvaluationReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const ordered_json j = report_to_json(report);
  write_text(out_dir / "report.json", j.dump(2) + "\n");
  write_report_csvs(j, out_dir);
}

std::vector<std::string> write_synth_corpus(const fs::path& out_dir, std::size_t n,
                                            std::uint64_t seed) {
  const auto dataset = synth_dataset(n, seed);
  fs::create_directories(out_dir / "images");
  std::vector<std::string> ids;
  std::string fixations_csv = "image_id,u,v\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "img_%03zu", i);
    ids.emplace_back(name);
    const Image& img = dataset[i].image;
    save_image(img, out_dir / "images" / (ids.back() + ".png"));

    // Luminance-weighted fixations: mostly on the bright shape, a few anywhere.
    SplitMix64 rng(mix_seed(mix_seed(seed, fnv1a64("fixations")), fnv1a64(ids.back())));
    const auto w = static_cast<double>(img.width);
    const auto h = static_cast<double>(img.height);
    std::size_t weighted = 0;
    std::size_t guard = 0;
    while (weighted < 18 && guard < 100000) {
      ++guard;
      const double u = rng.next_open01() * w;
      const double v = rng.next_open01() * h;
      const auto x = static_cast<std::size_t>(u);
      const auto y = static_cast<std::size_t>(v);
      const double lum = (static_cast<double>(img.at(y, x, 0)) + img.at(y, x, 1) +
                          img.at(y, x, 2)) /
                         3.0;
      if (rng.next_open01() * 255.0 >= lum) continue;
      ++weighted;
      fixations_csv += ids.back() + "," + nlohmann::json(u).dump() + "," +
                       nlohmann::json(v).dump() + "\n";
    }
    for (std::size_t k = 0; k < 4; ++k) {
      const double u = rng.next_open01() * w;
      const double v = rng.next_open01() * h;
      fixations_csv += ids.back() + "," + nlohmann::json(u).dump() + "," +
                       nlohmann::json(v).dump() + "\n";
    }
  }
  write_text(out_dir / "fixations.csv", fixations_csv);
  return ids;
}

}  // namespace xstab
