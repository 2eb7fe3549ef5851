#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/saliency_map.hpp"
#include "distort/distortions.hpp"
#include "explain/explainers.hpp"
#include "gaze/gfdm.hpp"
#include "json.hpp"
#include "model/toy_model.hpp"

namespace xstab {

enum class LipschitzAggregation { Max, PerVariant };

const char* lipschitz_aggregation_name(LipschitzAggregation a);
LipschitzAggregation lipschitz_aggregation_from_name(std::string_view s);

// Settings for training the built-in model instead of loading one.
struct TrainToy {
  std::size_t epochs = 5;
  double lr = 0.05;
  std::size_t samples = 300;
};

struct RunConfig {
  std::filesystem::path image_dir;
  std::filesystem::path fixation_path;
  std::filesystem::path model_path;     // empty when train_toy is set
  std::optional<TrainToy> train_toy;
  std::vector<std::string> explainers;  // subset of {fem, mlfem, gradcam}
  std::vector<DistortionSpec> distortions;
  FemParams fem_params;
  double sigma_fov = 0.0;               // 0 = width/20 default
  LipschitzAggregation lipschitz_aggregation = LipschitzAggregation::Max;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;

  void validate() const;  // Err::Config on any violation
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

enum class Cluster : std::size_t { Well = 0, Badly = 1 };
const char* cluster_name(Cluster c);

// Well iff the distorted image keeps the original image's label.
inline Cluster cluster_of(std::size_t original_label, std::size_t distorted_label) {
  return original_label == distorted_label ? Cluster::Well : Cluster::Badly;
}

struct LevelStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;
};

// Mean / population-std / count of one level's samples; EmptyLevel on [].
LevelStats aggregate(const std::vector<double>& values);

// Anything that maps an image to a saliency map; lets tests substitute
// analytic doubles for the model-backed methods.
class Explainer {
 public:
  virtual ~Explainer() = default;
  virtual std::string name() const = 0;
  virtual SaliencyMap explain(const Image& img) const = 0;
};

std::unique_ptr<Explainer> make_fem_explainer(const ToyModel& model, FemParams params,
                                              std::size_t out_w, std::size_t out_h);
std::unique_ptr<Explainer> make_gradcam_explainer(const ToyModel& model, std::size_t out_w,
                                                  std::size_t out_h);
std::unique_ptr<Explainer> make_mlfem_explainer(const ToyModel& model, FemParams params,
                                                FusionWeights weights, std::size_t out_w,
                                                std::size_t out_h);

struct ClusterBlock {
  std::vector<std::optional<LevelStats>> l, pcc, sim;  // one cell per level
  std::vector<std::optional<double>> stability;        // one cell per adjacent level pair
  std::optional<double> l_to_pcc, l_to_sim, pcc_to_sim;
};

struct FamilyResult {
  std::string family;
  std::vector<double> levels;
  std::size_t skipped = 0;  // variants identical to the source image
  ClusterBlock well, badly;

  const ClusterBlock& block(Cluster c) const { return c == Cluster::Well ? well : badly; }
};

struct ExplainerResult {
  std::string explainer;
  std::vector<FamilyResult> families;
};

struct EvaluationReport {
  std::uint64_t seed = 0;
  std::string config_hash;  // 16-hex digest of the canonical config JSON
  nlohmann::ordered_json config_echo;
  std::vector<std::pair<std::string, std::size_t>> images;  // id -> original label
  std::size_t skipped_variants = 0;
  std::vector<ExplainerResult> results;
};

// Everything evaluate_core needs, already materialized. run_evaluation fills
// this from a RunConfig; tests fill it with doubles.
struct EvaluationInputs {
  std::vector<std::string> ids;
  std::vector<Image> images;
  std::vector<SaliencyMap> gfdms;  // one per image, at image resolution
  std::function<std::size_t(const Image&)> classify;
  std::vector<const Explainer*> explainers;
  std::vector<DistortionSpec> distortions;  // per-spec seeds already derived
  LipschitzAggregation aggregation = LipschitzAggregation::Max;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

EvaluationReport evaluate_core(const EvaluationInputs& in);

// The one-shot pipeline: load/train model, load images and fixations, fit the
// layer-fusion weights on the clean images, evaluate every explainer x family,
// and aggregate. Deterministic for a fixed (inputs, config, seed).
EvaluationReport run_evaluation(const RunConfig& config);

nlohmann::ordered_json report_to_json(const EvaluationReport& report);

// Writes report.json, consensus.csv, series_<metric>_<family>_<explainer>.csv,
// and stability_<family>_<explainer>.csv under out_dir.
void write_report(const EvaluationReport& report, const std::filesystem::path& out_dir);

// Rewrites the CSV views from an existing report.json.
void write_report_csvs(const nlohmann::json& report_json, const std::filesystem::path& out_dir);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers (0 = auto). Results
// must be written to disjoint slots; the first worker exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// Thread cap from XSTAB_THREADS (0 or unset = auto).
std::size_t threads_from_env();

// Writes <out>/images/img_<i>.png plus <out>/fixations.csv for a seeded
// synthetic-shapes corpus whose fixations concentrate on the bright shape.
// Returns the image ids.
std::vector<std::string> write_synth_corpus(const std::filesystem::path& out_dir, std::size_t n,
                                            std::uint64_t seed);

}  // namespace xstab
