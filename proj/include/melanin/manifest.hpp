#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "melanin/error.hpp"
#include "melanin/image_io.hpp"
#include "melanin/iris.hpp"

namespace melanin {

enum class Eye { Left, Right };
enum class Session { VL, NIR, Fused };

inline std::string to_string(Eye e) { return e == Eye::Left ? "L" : "R"; }

inline std::string to_string(Session s) {
  switch (s) {
    case Session::VL: return "VL";
    case Session::NIR: return "NIR";
    case Session::Fused: return "FUSED";
  }
  return "?";
}

inline Eye parse_eye(const std::string& s) {
  if (s == "L") return Eye::Left;
  if (s == "R") return Eye::Right;
  throw DataError("eye must be \"L\" or \"R\", got \"" + s + "\"");
}

inline Session parse_session(const std::string& s) {
  if (s == "VL") return Session::VL;
  if (s == "NIR") return Session::NIR;
  if (s == "FUSED") return Session::Fused;
  throw DataError("session must be VL, NIR or FUSED, got \"" + s + "\"");
}

struct ManifestEntry {
  std::string subject_id;
  Eye eye = Eye::Left;
  Session session = Session::VL;
  std::string path;                      // as written; relative to the manifest
  std::optional<IrisGeometry> geometry;  // absent -> detect_circles

  /// Class identity used for recognition: one class per physical eye.
  std::string class_key() const { return subject_id + "_" + to_string(eye); }
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // relative image paths resolve against this

  std::filesystem::path resolve(const ManifestEntry& e) const {
    const std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

inline DatasetManifest parse_manifest(const std::string& text,
                                      const std::filesystem::path& base_dir = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("manifest must be a JSON array");
  DatasetManifest m;
  m.base_dir = base_dir;
  std::size_t i = 0;
  for (const auto& item : doc) {
    const std::string where = "manifest entry " + std::to_string(i++);
    try {
      ManifestEntry e;
      e.subject_id = item.at("subject_id").get<std::string>();
      e.eye = parse_eye(item.at("eye").get<std::string>());
      e.session = parse_session(item.at("session").get<std::string>());
      if (e.session == Session::Fused) throw DataError("FUSED is not a capture session");
      e.path = item.at("path").get<std::string>();
      if (item.contains("geometry") && !item["geometry"].is_null()) {
        const auto& g = item["geometry"];
        IrisGeometry geom;
        geom.center_x = g.at("cx").get<double>();
        geom.center_y = g.at("cy").get<double>();
        geom.pupil_radius = g.at("r_pupil").get<double>();
        geom.iris_radius = g.at("r_iris").get<double>();
        if (g.contains("span_deg")) {
          const auto& span = g["span_deg"];
          if (!span.is_array() || span.size() != 2) throw DataError("span_deg must be [a, b]");
          geom.span_start = span[0].get<double>();
          geom.span_end = span[1].get<double>();
        }
        geom.validate();
        e.geometry = geom;
      }
      if (e.subject_id.empty()) throw DataError("empty subject_id");
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(where + ": " + ex.what());
    } catch (const Error& ex) {
      throw DataError(where + ": " + ex.what());
    }
  }
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json doc = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries) {
    nlohmann::json item{{"subject_id", e.subject_id},
                        {"eye", to_string(e.eye)},
                        {"session", to_string(e.session)},
                        {"path", e.path}};
    if (e.geometry) {
      const IrisGeometry& g = *e.geometry;
      item["geometry"] = {{"cx", g.center_x},
                          {"cy", g.center_y},
                          {"r_pupil", g.pupil_radius},
                          {"r_iris", g.iris_radius},
                          {"span_deg", {g.span_start, g.span_end}}};
    }
    doc.push_back(std::move(item));
  }
  return doc;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  write_text_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace melanin
