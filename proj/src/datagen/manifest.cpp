#include "vv/datagen/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vv/common/fs.hpp"
#include "vv/geometry/io.hpp"

namespace vv::data {

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  write_file_atomic(path, [&](std::ostream& out) {
    out << "# vv dataset manifest\n";
    for (std::size_t i = 0; i < manifest.scenes.size(); ++i) {
      out << "scene " << i << ' ' << manifest.scenes[i].generic_string() << '\n';
    }
    for (const auto& s : manifest.samples) {
      out << "sample " << s.scene << ' ' << s.origin_x << ' ' << s.origin_y << ' ' << s.rotation << ' ';
      if (s.view_ids.empty()) out << '-';
      for (std::size_t v = 0; v < s.view_ids.size(); ++v) out << (v ? "," : "") << s.view_ids[v];
      out << '\n';
    }
  });
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "scene") {
      std::size_t index = 0;
      std::string p;
      if (!(ls >> index >> p)) fail("expected 'scene <index> <path>'");
      if (index != m.scenes.size()) fail("scene indices must be consecutive from 0");
      std::filesystem::path sp(p);
      if (sp.is_relative()) sp = path.parent_path() / sp;
      m.scenes.push_back(sp);
    } else if (kind == "sample") {
      Sample s;
      std::string views;
      if (!(ls >> s.scene >> s.origin_x >> s.origin_y >> s.rotation >> views)) {
        fail("expected 'sample <scene> <x> <y> <rotation> <views>'");
      }
      if (s.scene < 0 || s.scene >= static_cast<int>(m.scenes.size())) fail("unknown scene index");
      if (s.rotation < 0 || s.rotation > 7) fail("rotation must be in 0..7");
      if (views != "-") {
        std::istringstream vs(views);
        std::string id;
        while (std::getline(vs, id, ',')) {
          try {
            s.view_ids.push_back(std::stoi(id));
          } catch (const std::exception&) {
            fail("bad view id '" + id + "'");
          }
        }
      }
      m.samples.push_back(std::move(s));
    } else {
      fail("unknown record '" + kind + "'");
    }
  }
  return m;
}

void save_scene_bundle(const std::filesystem::path& path, const Scene& scene) {
  geo::save_scene(path, scene.grid, scene.labels);
  geo::save_scene_views(path, scene.views);
}

Scene load_scene_bundle(const std::filesystem::path& path) {
  auto volume = geo::load_scene(path);
  Scene s;
  s.grid = std::move(volume.grid);
  s.labels = std::move(volume.labels);
  s.views = geo::load_scene_views(path);
  return s;
}

}  // namespace vv::data
