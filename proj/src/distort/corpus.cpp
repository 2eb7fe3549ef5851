#include "distort/corpus.hpp"

#include <cstdio>
#include <fstream>

#include "core/rng.hpp"

namespace xstab {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string level_dir_name(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", level);
  return buf;
}

ordered_json spec_to_json(const DistortionSpec& spec) {
  ordered_json j;
  j["family"] = family_name(spec.family);
  j["levels"] = spec.levels;
  switch (spec.family) {
    case Family::GaussianBlur:
      j["mask_sizes"] = spec.mask_sizes;
      break;
    case Family::Perspective: {
      std::vector<std::string> names;
      for (Orientation o : spec.orientations) names.emplace_back(orientation_name(o));
      j["orientations"] = names;
      break;
    }
    default:
      j["variants_per_level"] = spec.variants_per_level;
      j["seed"] = spec.seed;
      break;
  }
  return j;
}

DistortionSpec spec_from_json(const nlohmann::json& j) {
  DistortionSpec spec;
  try {
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.levels = j.at("levels").get<std::vector<double>>();
    if (j.contains("variants_per_level"))
      spec.variants_per_level = j["variants_per_level"].get<std::size_t>();
    if (j.contains("mask_sizes")) spec.mask_sizes = j["mask_sizes"].get<std::vector<int>>();
    if (j.contains("orientations")) {
      spec.orientations.clear();
      for (const auto& s : j["orientations"])
        spec.orientations.push_back(orientation_from_name(s.get<std::string>()));
    }
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Config, std::string("bad distortion spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

namespace {

std::string file_hash_hex(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(Err::Io, "cannot hash " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

}  // namespace

ordered_json write_corpus(const std::vector<std::pair<std::string, Image>>& images,
                          const std::vector<DistortionSpec>& specs,
                          const fs::path& out_dir) {
  if (images.empty()) fail(Err::EmptyInput, "write_corpus: no images");
  if (specs.empty()) fail(Err::EmptyInput, "write_corpus: no distortion specs");
  fs::create_directories(out_dir);

  ordered_json manifest;
  manifest["specs"] = ordered_json::array();
  for (const auto& s : specs) manifest["specs"].push_back(spec_to_json(s));
  manifest["images"] = ordered_json::array();
  for (const auto& [id, img] : images) manifest["images"].push_back(id);

  ordered_json entries = ordered_json::array();
  for (const auto& [id, img] : images) {
    for (const auto& spec : specs) {
      const auto variants = generate_distortion_set(img, id, spec);
      for (const auto& dv : variants) {
        const fs::path rel = fs::path(id) / family_name(spec.family) /
                             level_dir_name(dv.level) / (std::to_string(dv.variant_index) + ".png");
        const fs::path abs = out_dir / rel;
        fs::create_directories(abs.parent_path());
        save_image(dv.image, abs);

        ordered_json e;
        e["image_id"] = id;
        e["family"] = family_name(spec.family);
        e["level"] = dv.level;
        e["level_index"] = dv.level_index;
        e["variant_index"] = dv.variant_index;
        if (dv.seeded)
          e["seed"] = dv.seed;
        else
          e["seed"] = nullptr;
        if (spec.family == Family::GaussianBlur) e["mask_size"] = dv.mask_size;
        if (spec.family == Family::Perspective)
          e["orientation"] = orientation_name(dv.orientation);
        e["path"] = rel.generic_string();
        e["hash"] = file_hash_hex(abs);
        entries.push_back(std::move(e));
      }
    }
  }
  manifest["entries"] = std::move(entries);

  std::ofstream out(out_dir / "manifest.json");
  if (!out) fail(Err::Io, "cannot write manifest.json in " + out_dir.string());
  out << manifest.dump(2) << "\n";
  return manifest;
}

}  // namespace xstab
