#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fetal/engine.hpp"
#include "fetal/run_store.hpp"

namespace fetal {

// Probes the image header for its size. Throws ImageError when unreadable.
ImageRef image_ref_from_file(const std::filesystem::path& path, std::optional<double> spacing_mm = std::nullopt,
                             std::optional<PlaneLabel> plane_hint = std::nullopt, std::string id = {});

// Stream manifest:
//   {"id", "fps", "pixel_spacing_mm", "frames": [path | {"path","id","pixel_spacing_mm"}],
//    "metadata": {"lmp_date","exam_date","patient_id"}}
// Frame paths resolve against base_dir. Throws ValidationError / ImageError.
VideoStream video_from_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                const std::string& default_id = "video");
VideoStream load_video_manifest(const std::filesystem::path& path);

struct RunOutput {
  std::string run_id;
  std::string report_json;
  std::string report_md;
  nlohmann::json record;
};

// The single code path behind both the CLI and the HTTP service: run the
// engine, render the report, persist the run record.
RunOutput run_image_query(Engine& engine, RunStore& store, const Query& q);
RunOutput run_video_query(Engine& engine, RunStore& store, const Query& q);

}  // namespace fetal
