#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vv/datagen/sampler.hpp"

namespace vv::data {

// Line-oriented dataset listing:
//   scene <index> <path>
//   sample <scene> <origin_x> <origin_y> <rotation> <view,ids|->
// Relative scene paths resolve against the manifest's directory. Lines
// starting with '#' are comments.
struct Manifest {
  std::vector<std::filesystem::path> scenes;  ///< position = scene index
  std::vector<Sample> samples;                ///< geometry not materialized
};

void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Throws std::runtime_error naming the line on malformed input.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes the scene volume and its views ("<path>.view000", ...).
void save_scene_bundle(const std::filesystem::path& path, const Scene& scene);
Scene load_scene_bundle(const std::filesystem::path& path);

}  // namespace vv::data
