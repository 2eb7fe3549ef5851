#include "xstab/xstab.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/npy.hpp"
#include "core/overlay.hpp"
#include "core/saliency_map.hpp"
#include "distort/corpus.hpp"
#include "error.hpp"
#include "explain/explainers.hpp"
#include "gaze/gfdm.hpp"
#include "json.hpp"
#include "metrics/metrics.hpp"
#include "model/toy_model.hpp"
#include "model/synth.hpp"
#include "pipeline/pipeline.hpp"
#include "version.hpp"

struct xstab_image {
  xstab::Image v;
};
struct xstab_map {
  xstab::SaliencyMap v;
};
struct xstab_model {
  xstab::ToyModel v;
};

namespace {

thread_local std::string g_last_error;

xstab_status status_of(xstab::Err code) {
  using xstab::Err;
  switch (code) {
    case Err::Io: return XSTAB_E_IO;
    case Err::Format: return XSTAB_E_FORMAT;
    case Err::EmptyInput: return XSTAB_E_EMPTY_INPUT;
    case Err::InvalidParameter: return XSTAB_E_INVALID_PARAMETER;
    case Err::ShapeMismatch: return XSTAB_E_SHAPE_MISMATCH;
    case Err::DegenerateQuad: return XSTAB_E_DEGENERATE_QUAD;
    case Err::ZeroMass: return XSTAB_E_ZERO_MASS;
    case Err::NegativeValue: return XSTAB_E_NEGATIVE_VALUE;
    case Err::NonFiniteInput: return XSTAB_E_NON_FINITE_INPUT;
    case Err::ZeroVariance: return XSTAB_E_ZERO_VARIANCE;
    case Err::IdenticalInputs: return XSTAB_E_IDENTICAL_INPUTS;
    case Err::NoValidVariants: return XSTAB_E_NO_VALID_VARIANTS;
    case Err::ZeroBaseline: return XSTAB_E_ZERO_BASELINE;
    case Err::LengthMismatch: return XSTAB_E_LENGTH_MISMATCH;
    case Err::EmptyFixations: return XSTAB_E_EMPTY_FIXATIONS;
    case Err::EmptyDataset: return XSTAB_E_EMPTY_DATASET;
    case Err::EmptyTrainingSet: return XSTAB_E_EMPTY_TRAINING_SET;
    case Err::InvalidLayer: return XSTAB_E_INVALID_LAYER;
    case Err::EmptyLevel: return XSTAB_E_EMPTY_LEVEL;
    case Err::Config: return XSTAB_E_CONFIG;
    case Err::Data: return XSTAB_E_DATA;
  }
  return XSTAB_E_UNKNOWN;
}

// Runs fn, translating exceptions into status codes + the thread-local message.
template <typename Fn>
xstab_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return XSTAB_OK;
  } catch (const xstab::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return XSTAB_E_UNKNOWN;
  }
}

xstab_status invalid(const char* msg) {
  g_last_error = msg;
  return XSTAB_E_INVALID_PARAMETER;
}

}  // namespace

extern "C" {

const char* xstab_version(void) { return xstab::kVersion; }

const char* xstab_last_error(void) { return g_last_error.c_str(); }

const char* xstab_status_name(xstab_status status) {
  switch (status) {
    case XSTAB_OK: return "Ok";
    case XSTAB_E_IO: return "IoError";
    case XSTAB_E_FORMAT: return "FormatError";
    case XSTAB_E_EMPTY_INPUT: return "EmptyInput";
    case XSTAB_E_INVALID_PARAMETER: return "InvalidParameter";
    case XSTAB_E_SHAPE_MISMATCH: return "ShapeMismatch";
    case XSTAB_E_DEGENERATE_QUAD: return "DegenerateQuad";
    case XSTAB_E_ZERO_MASS: return "ZeroMass";
    case XSTAB_E_NEGATIVE_VALUE: return "NegativeValue";
    case XSTAB_E_NON_FINITE_INPUT: return "NonFiniteInput";
    case XSTAB_E_ZERO_VARIANCE: return "ZeroVariance";
    case XSTAB_E_IDENTICAL_INPUTS: return "IdenticalInputs";
    case XSTAB_E_NO_VALID_VARIANTS: return "NoValidVariants";
    case XSTAB_E_ZERO_BASELINE: return "ZeroBaseline";
    case XSTAB_E_LENGTH_MISMATCH: return "LengthMismatch";
    case XSTAB_E_EMPTY_FIXATIONS: return "EmptyFixations";
    case XSTAB_E_EMPTY_DATASET: return "EmptyDataset";
    case XSTAB_E_EMPTY_TRAINING_SET: return "EmptyTrainingSet";
    case XSTAB_E_INVALID_LAYER: return "InvalidLayer";
    case XSTAB_E_EMPTY_LEVEL: return "EmptyLevel";
    case XSTAB_E_CONFIG: return "ConfigError";
    case XSTAB_E_DATA: return "DataError";
    default: return "UnknownError";
  }
}

xstab_status xstab_image_create(size_t width, size_t height, const uint8_t* rgb,
                                xstab_image** out) {
  if (!rgb || !out) return invalid("xstab_image_create: null argument");
  return guarded([&] {
    auto img = std::make_unique<xstab_image>();
    img->v = xstab::Image(height, width);
    std::memcpy(img->v.pixels.data(), rgb, width * height * 3);
    *out = img.release();
  });
}

xstab_status xstab_image_load(const char* path, xstab_image** out) {
  if (!path || !out) return invalid("xstab_image_load: null argument");
  return guarded([&] {
    auto img = std::make_unique<xstab_image>();
    img->v = xstab::load_image(path);
    *out = img.release();
  });
}

xstab_status xstab_image_save(const xstab_image* img, const char* path) {
  if (!img || !path) return invalid("xstab_image_save: null argument");
  return guarded([&] { xstab::save_image(img->v, path); });
}

void xstab_image_free(xstab_image* img) { delete img; }

size_t xstab_image_width(const xstab_image* img) { return img ? img->v.width : 0; }

size_t xstab_image_height(const xstab_image* img) { return img ? img->v.height : 0; }

xstab_status xstab_image_pixels(const xstab_image* img, uint8_t* buf, size_t buf_len) {
  if (!img || !buf) return invalid("xstab_image_pixels: null argument");
  if (buf_len < img->v.pixels.size()) return invalid("xstab_image_pixels: buffer too small");
  std::memcpy(buf, img->v.pixels.data(), img->v.pixels.size());
  return XSTAB_OK;
}

xstab_status xstab_map_create(size_t width, size_t height, const double* values,
                              xstab_map** out) {
  if (!values || !out) return invalid("xstab_map_create: null argument");
  return guarded([&] {
    auto map = std::make_unique<xstab_map>();
    map->v = xstab::SaliencyMap(height, width);
    std::memcpy(map->v.data.data(), values, width * height * sizeof(double));
    *out = map.release();
  });
}

xstab_status xstab_map_load_npy(const char* path, xstab_map** out) {
  if (!path || !out) return invalid("xstab_map_load_npy: null argument");
  return guarded([&] {
    auto map = std::make_unique<xstab_map>();
    map->v = xstab::load_map_npy(path);
    *out = map.release();
  });
}

xstab_status xstab_map_save_npy(const xstab_map* map, const char* path) {
  if (!map || !path) return invalid("xstab_map_save_npy: null argument");
  return guarded([&] { xstab::save_map_npy(map->v, path); });
}

xstab_status xstab_map_save_heatmap(const xstab_map* map, const xstab_image* base,
                                    const char* path) {
  if (!map || !path) return invalid("xstab_map_save_heatmap: null argument");
  return guarded([&] {
    const xstab::Image img = base ? xstab::render_heatmap_overlay(map->v, base->v)
                                  : xstab::render_heatmap(map->v);
    xstab::save_image(img, path);
  });
}

void xstab_map_free(xstab_map* map) { delete map; }

size_t xstab_map_width(const xstab_map* map) { return map ? map->v.width : 0; }

size_t xstab_map_height(const xstab_map* map) { return map ? map->v.height : 0; }

xstab_status xstab_map_values(const xstab_map* map, double* buf, size_t buf_len) {
  if (!map || !buf) return invalid("xstab_map_values: null argument");
  if (buf_len < map->v.data.size()) return invalid("xstab_map_values: buffer too small");
  std::memcpy(buf, map->v.data.data(), map->v.data.size() * sizeof(double));
  return XSTAB_OK;
}

xstab_status xstab_generate_corpus(const char* images_dir, const char* specs_json_path,
                                   const char* out_dir) {
  if (!images_dir || !specs_json_path || !out_dir) {
    return invalid("xstab_generate_corpus: null argument");
  }
  return guarded([&] {
    namespace fs = std::filesystem;
    std::ifstream in(specs_json_path);
    if (!in) xstab::fail(xstab::Err::Io, std::string("cannot open ") + specs_json_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      xstab::fail(xstab::Err::Config, std::string("bad specs JSON: ") + e.what());
    }
    const nlohmann::json& list = j.is_object() && j.contains("distortions") ? j["distortions"] : j;
    if (!list.is_array() || list.empty()) {
      xstab::fail(xstab::Err::Config, "specs JSON must be a non-empty array");
    }
    std::vector<xstab::DistortionSpec> specs;
    for (const auto& sj : list) specs.push_back(xstab::spec_from_json(sj));

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      xstab::fail(xstab::Err::EmptyDataset,
                  std::string("no .png/.ppm images in ") + images_dir);
    }
    std::vector<std::pair<std::string, xstab::Image>> images;
    for (const auto& p : files) images.emplace_back(p.stem().string(), xstab::load_image(p));
    xstab::write_corpus(images, specs, out_dir);
  });
}

xstab_status xstab_gfdm(const char* fixations_path, const char* image_id, size_t width,
                        size_t height, double sigma_fov, xstab_map** out) {
  if (!fixations_path || !image_id || !out) return invalid("xstab_gfdm: null argument");
  return guarded([&] {
    const auto sets = xstab::load_fixations(fixations_path, width, height);
    const xstab::FixationSet* found = nullptr;
    for (const auto& s : sets) {
      if (s.image_id == image_id) {
        found = &s;
        break;
      }
    }
    if (!found) {
      xstab::fail(xstab::Err::Data, std::string("no fixations for image '") + image_id + "'");
    }
    const double sigma = sigma_fov > 0.0 ? sigma_fov : xstab::default_sigma_fov(width);
    auto map = std::make_unique<xstab_map>();
    map->v = xstab::gfdm(*found, sigma);
    *out = map.release();
  });
}

xstab_status xstab_model_load(const char* dir, xstab_model** out) {
  if (!dir || !out) return invalid("xstab_model_load: null argument");
  return guarded([&] {
    auto model = std::make_unique<xstab_model>();
    model->v = xstab::load_model(dir);
    *out = model.release();
  });
}

xstab_status xstab_model_save(const xstab_model* model, const char* dir) {
  if (!model || !dir) return invalid("xstab_model_save: null argument");
  return guarded([&] { xstab::save_model(model->v, dir); });
}

xstab_status xstab_model_train_toy(size_t epochs, double lr, size_t samples, uint64_t seed,
                                   xstab_model** out) {
  if (!out) return invalid("xstab_model_train_toy: null argument");
  return guarded([&] {
    const auto dataset = xstab::synth_dataset(samples, xstab::mix_seed(seed, xstab::fnv1a64("train-data")));
    const xstab::ToyModel base =
        xstab::make_toy_model(xstab::mix_seed(seed, xstab::fnv1a64("model-init")));
    auto model = std::make_unique<xstab_model>();
    model->v = xstab::train(base, dataset, epochs, lr,
                            xstab::mix_seed(seed, xstab::fnv1a64("train")));
    *out = model.release();
  });
}

void xstab_model_free(xstab_model* model) { delete model; }

size_t xstab_model_layer_count(const xstab_model* model) {
  return model ? model->v.n_layers() : 0;
}

xstab_status xstab_model_classify(const xstab_model* model, const xstab_image* img,
                                  size_t* label) {
  if (!model || !img || !label) return invalid("xstab_model_classify: null argument");
  return guarded([&] {
    const xstab::Image in =
        xstab::resize_image_bilinear(img->v, model->v.input_h, model->v.input_w);
    *label = xstab::forward(model->v, in).label;
  });
}

xstab_status xstab_explain(const xstab_model* model, const xstab_image* img, const char* method,
                           double fem_k, const double* weights, size_t n_weights, size_t out_w,
                           size_t out_h, xstab_map** out) {
  if (!model || !img || !method || !out) return invalid("xstab_explain: null argument");
  return guarded([&] {
    const std::string name = method;
    const xstab::Image in =
        xstab::resize_image_bilinear(img->v, model->v.input_h, model->v.input_w);
    const xstab::ForwardCache cache = xstab::forward(model->v, in);
    xstab::FemParams params;
    params.k = fem_k;
    auto map = std::make_unique<xstab_map>();
    if (name == "fem") {
      map->v = xstab::fem(cache.activations.back(), params, out_w, out_h);
    } else if (name == "gradcam") {
      const std::size_t last = model->v.n_layers() - 1;
      const xstab::ActivationTensor grad =
          xstab::grad_wrt_activation(model->v, cache, cache.label, last);
      map->v = xstab::gradcam(cache.activations.back(), grad, out_w, out_h);
    } else if (name == "mlfem") {
      xstab::FusionWeights fw;
      const std::size_t n_layers = model->v.n_layers();
      if (weights) {
        if (n_weights != n_layers) {
          xstab::fail(xstab::Err::LengthMismatch,
                      "xstab_explain: weight count differs from layer count");
        }
        fw.w.assign(weights, weights + n_weights);
      } else {
        fw.w.assign(n_layers, 1.0 / static_cast<double>(n_layers));
      }
      map->v = xstab::mlfem(xstab::mlfem_layer_maps(cache, params, out_w, out_h), fw);
    } else {
      xstab::fail(xstab::Err::InvalidParameter,
                  "xstab_explain: unknown method '" + name + "'");
    }
    *out = map.release();
  });
}

xstab_status xstab_fit_fusion_weights(const xstab_model* model, const xstab_image* const* images,
                                      const xstab_map* const* references, size_t n, double fem_k,
                                      double* weights_out, size_t n_weights) {
  if (!model || !images || !references || !weights_out) {
    return invalid("xstab_fit_fusion_weights: null argument");
  }
  return guarded([&] {
    if (n_weights != model->v.n_layers()) {
      xstab::fail(xstab::Err::LengthMismatch,
                  "xstab_fit_fusion_weights: weight buffer size differs from layer count");
    }
    xstab::FemParams params;
    params.k = fem_k;
    std::vector<std::vector<xstab::SaliencyMap>> per_image;
    std::vector<xstab::SaliencyMap> refs;
    for (size_t i = 0; i < n; ++i) {
      if (!images[i] || !references[i]) {
        xstab::fail(xstab::Err::InvalidParameter, "xstab_fit_fusion_weights: null entry");
      }
      const xstab::Image in =
          xstab::resize_image_bilinear(images[i]->v, model->v.input_h, model->v.input_w);
      per_image.push_back(xstab::mlfem_layer_maps(xstab::forward(model->v, in), params,
                                                  references[i]->v.width,
                                                  references[i]->v.height));
      refs.push_back(references[i]->v);
    }
    const xstab::FusionWeights fw = xstab::fit_fusion_weights(per_image, refs);
    std::memcpy(weights_out, fw.w.data(), fw.w.size() * sizeof(double));
  });
}

xstab_status xstab_pcc(const xstab_map* a, const xstab_map* b, double* out) {
  if (!a || !b || !out) return invalid("xstab_pcc: null argument");
  return guarded([&] { *out = xstab::pcc(a->v, b->v); });
}

xstab_status xstab_sim(const xstab_map* a, const xstab_map* b, double* out) {
  if (!a || !b || !out) return invalid("xstab_sim: null argument");
  return guarded([&] { *out = xstab::sim(a->v, b->v); });
}

xstab_status xstab_image_distance(const xstab_image* a, const xstab_image* b, double* out) {
  if (!a || !b || !out) return invalid("xstab_image_distance: null argument");
  return guarded([&] { *out = xstab::image_distance(a->v, b->v); });
}

xstab_status xstab_map_distance(const xstab_map* a, const xstab_map* b, double* out) {
  if (!a || !b || !out) return invalid("xstab_map_distance: null argument");
  return guarded([&] { *out = xstab::map_distance(a->v, b->v); });
}

xstab_status xstab_lipschitz_ratio(const xstab_image* x, const xstab_image* xp,
                                   const xstab_map* e, const xstab_map* ep, double* out) {
  if (!x || !xp || !e || !ep || !out) return invalid("xstab_lipschitz_ratio: null argument");
  return guarded([&] { *out = xstab::lipschitz_ratio(x->v, xp->v, e->v, ep->v); });
}

xstab_status xstab_evaluate(const char* config_json_path, const char* out_dir,
                            int64_t seed_override) {
  if (!config_json_path) return invalid("xstab_evaluate: null config path");
  return guarded([&] {
    xstab::RunConfig config = xstab::load_config(config_json_path);
    if (out_dir && *out_dir) config.out_dir = out_dir;
    if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
    const xstab::EvaluationReport report = xstab::run_evaluation(config);
    xstab::write_report(report, config.out_dir);
  });
}

xstab_status xstab_report_csvs(const char* report_json_path, const char* out_dir) {
  if (!report_json_path || !out_dir) return invalid("xstab_report_csvs: null argument");
  return guarded([&] {
    std::ifstream in(report_json_path);
    if (!in) xstab::fail(xstab::Err::Io, std::string("cannot open ") + report_json_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      xstab::fail(xstab::Err::Format, std::string("bad report JSON: ") + e.what());
    }
    try {
      xstab::write_report_csvs(j, out_dir);
    } catch (const nlohmann::json::exception& e) {
      xstab::fail(xstab::Err::Format, std::string("report JSON shape: ") + e.what());
    }
  });
}

xstab_status xstab_synth_corpus(const char* out_dir, size_t n_images, uint64_t seed) {
  if (!out_dir) return invalid("xstab_synth_corpus: null argument");
  return guarded([&] { xstab::write_synth_corpus(out_dir, n_images, seed); });
}

} /* extern "C" */
