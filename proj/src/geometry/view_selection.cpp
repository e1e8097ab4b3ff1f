#include "vv/geometry/view_selection.hpp"

#include <string>

namespace vv::geo {

CoverageSet coverage_of(int view_id, const AssociationMap& map) {
  CoverageSet set{view_id, std::vector<std::uint8_t>(map.dims().count(), 0)};
  for (std::size_t v = 0; v < set.covered.size(); ++v) set.covered[v] = map.flat(v) >= 0 ? 1 : 0;
  return set;
}

std::vector<std::size_t> greedy_select(const std::vector<CoverageSet>& candidates, int k) {
  if (k < 1) throw GeometryError("greedy view selection: k must be >= 1");
  std::vector<std::size_t> picked;
  if (candidates.empty()) return picked;
  const std::size_t n = candidates.front().covered.size();
  for (const auto& c : candidates) {
    if (c.covered.size() != n) throw GeometryError("greedy view selection: coverage size mismatch");
  }
  std::vector<std::uint8_t> covered(n, 0);
  std::vector<std::uint8_t> used(candidates.size(), 0);
  while (static_cast<int>(picked.size()) < k) {
    std::size_t best = candidates.size();
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      std::size_t gain = 0;
      for (std::size_t v = 0; v < n; ++v) gain += (candidates[c].covered[v] && !covered[v]) ? 1 : 0;
      const bool better = gain > best_gain ||
                          (gain == best_gain && gain > 0 && best < candidates.size() &&
                           candidates[c].view_id < candidates[best].view_id);
      if (better) {
        best = c;
        best_gain = gain;
      }
    }
    if (best == candidates.size() || best_gain == 0) break;
    used[best] = 1;
    picked.push_back(best);
    for (std::size_t v = 0; v < n; ++v) covered[v] |= candidates[best].covered[v];
  }
  return picked;
}

ViewSelection greedy_view_selection(const std::vector<View>& candidates, const VoxelFrame& frame,
                                    int k, int downsample, double depth_threshold) {
  std::vector<AssociationMap> maps;
  std::vector<CoverageSet> sets;
  maps.reserve(candidates.size());
  sets.reserve(candidates.size());
  for (const auto& view : candidates) {
    maps.push_back(compute_association_map(frame, view, downsample, depth_threshold));
    sets.push_back(coverage_of(view.id, maps.back()));
  }
  ViewSelection out;
  for (const auto pos : greedy_select(sets, k)) {
    out.view_ids.push_back(candidates[pos].id);
    out.maps.push_back(std::move(maps[pos]));
  }
  return out;
}

double compute_coverage(std::span<const AssociationMap> maps, const LabelGrid& labels) {
  std::size_t annotated = 0, covered = 0;
  for (const auto& m : maps) {
    if (!(m.dims() == labels.dims)) throw GeometryError("coverage: grid dims mismatch");
  }
  for (std::size_t v = 0; v < labels.labels.size(); ++v) {
    if (!is_annotated(labels.labels[v])) continue;
    ++annotated;
    for (const auto& m : maps) {
      if (m.flat(v) >= 0) {
        ++covered;
        break;
      }
    }
  }
  if (annotated == 0) throw GeometryError("coverage: region has no annotated voxel");
  return static_cast<double>(covered) / static_cast<double>(annotated);
}

}  // namespace vv::geo
