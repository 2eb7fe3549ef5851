#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "distort/distortions.hpp"
#include "json.hpp"

namespace xstab {

// Serializes a DistortionSpec to/from its manifest/config JSON form.
nlohmann::ordered_json spec_to_json(const DistortionSpec& spec);
DistortionSpec spec_from_json(const nlohmann::json& j);

// Writes every (image, spec) grid under
//   <out>/<image-id>/<family>/<level>/<variant>.png
// and records specs, derived seeds, and file hashes in <out>/manifest.json.
// Returns the manifest.
nlohmann::ordered_json write_corpus(const std::vector<std::pair<std::string, Image>>& images,
                                    const std::vector<DistortionSpec>& specs,
                                    const std::filesystem::path& out_dir);

// "25", "2.5", "0.75": compact decimal used for level directory names.
std::string level_dir_name(double level);

}  // namespace xstab
