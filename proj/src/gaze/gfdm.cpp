#include "gaze/gfdm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace xstab {

void FixationSet::validate() const {
  if (width == 0 || height == 0) fail(Err::InvalidParameter, "fixation set: zero image size");
  for (const auto& [u, v] : points) {
    if (!(u >= 0.0 && u < static_cast<double>(width) && v >= 0.0 &&
          v < static_cast<double>(height)))
      fail(Err::Data, "fixation outside image bounds for " + image_id);
  }
}

SaliencyMap gfdm(const FixationSet& fixations, double sigma_fov) {
  if (!(sigma_fov > 0.0)) fail(Err::InvalidParameter, "gfdm: sigma_fov must be positive");
  if (fixations.points.empty()) fail(Err::EmptyFixations, "gfdm: no fixations for " + fixations.image_id);
  fixations.validate();

  SaliencyMap m(fixations.height, fixations.width);
  const double inv2s2 = 1.0 / (2.0 * sigma_fov * sigma_fov);
  for (std::size_t v = 0; v < m.height; ++v) {
    for (std::size_t u = 0; u < m.width; ++u) {
      double s = 0.0;
      for (const auto& [fu, fv] : fixations.points) {
        const double du = static_cast<double>(u) - fu;
        const double dv = static_cast<double>(v) - fv;
        s += std::exp(-(du * du + dv * dv) * inv2s2);
      }
      m.at(v, u) = s;
    }
  }
  const double mx = *std::max_element(m.data.begin(), m.data.end());
  for (double& x : m.data) x /= mx;
  return m;
}

namespace {

std::vector<FixationSet> group_points(
    const std::vector<std::pair<std::string, std::pair<double, double>>>& rows,
    std::size_t width, std::size_t height, const std::string& origin) {
  std::vector<FixationSet> sets;
  for (const auto& [id, pt] : rows) {
    auto it = std::find_if(sets.begin(), sets.end(),
                           [&](const FixationSet& s) { return s.image_id == id; });
    if (it == sets.end()) {
      FixationSet s;
      s.image_id = id;
      s.width = width;
      s.height = height;
      sets.push_back(std::move(s));
      it = std::prev(sets.end());
    }
    it->points.push_back(pt);
  }
  if (sets.empty()) fail(Err::EmptyFixations, "no fixations in " + origin);
  for (const auto& s : sets) s.validate();
  return sets;
}

}  // namespace

std::vector<FixationSet> load_fixations_csv(const std::filesystem::path& path,
                                            std::size_t width, std::size_t height) {
  std::ifstream in(path);
  if (!in) fail(Err::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(Err::Format, "empty fixation file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "image_id,u,v")
    fail(Err::Format, "fixation CSV must start with 'image_id,u,v': " + path.string());

  std::vector<std::pair<std::string, std::pair<double, double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, us, vs;
    if (!std::getline(ss, id, ',') || !std::getline(ss, us, ',') || !std::getline(ss, vs))
      fail(Err::Format, path.string() + ": malformed row " + std::to_string(lineno));
    try {
      rows.emplace_back(id, std::make_pair(std::stod(us), std::stod(vs)));
    } catch (const std::exception&) {
      fail(Err::Format, path.string() + ": bad coordinates on row " + std::to_string(lineno));
    }
  }
  return group_points(rows, width, height, path.string());
}

std::vector<FixationSet> load_fixations_json(const std::filesystem::path& path,
                                             std::size_t width, std::size_t height) {
  std::ifstream in(path);
  if (!in) fail(Err::Io, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::Format, path.string() + ": " + e.what());
  }
  std::vector<std::pair<std::string, std::pair<double, double>>> rows;
  auto consume = [&rows, &path](const nlohmann::json& obj) {
    try {
      const std::string id = obj.at("image_id").get<std::string>();
      for (const auto& p : obj.at("points")) {
        if (!p.is_array() || p.size() != 2)
          fail(Err::Format, path.string() + ": points must be [u,v] pairs");
        rows.emplace_back(id, std::make_pair(p[0].get<double>(), p[1].get<double>()));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(Err::Format, path.string() + ": " + e.what());
    }
  };
  if (doc.is_array())
    for (const auto& obj : doc) consume(obj);
  else
    consume(doc);
  return group_points(rows, width, height, path.string());
}

std::vector<FixationSet> load_fixations(const std::filesystem::path& path, std::size_t width,
                                        std::size_t height) {
  const std::string ext = path.extension().string();
  if (ext == ".csv") return load_fixations_csv(path, width, height);
  if (ext == ".json") return load_fixations_json(path, width, height);
  fail(Err::Format, "fixation file must be .csv or .json: " + path.string());
}

}  // namespace xstab
