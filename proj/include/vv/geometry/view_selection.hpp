#pragma once

#include <span>
#include <vector>

#include "vv/geometry/grids.hpp"

namespace vv::geo {

struct CoverageSet {
  int view_id = 0;
  std::vector<std::uint8_t> covered;  ///< per voxel, 1 if associated
};

CoverageSet coverage_of(int view_id, const AssociationMap& map);

/// Greedy maximum coverage: repeatedly takes the candidate covering the most
/// voxels not yet covered (ties -> lowest view id) and stops after k picks or
/// when the best marginal gain is zero. Returns positions into `candidates`.
std::vector<std::size_t> greedy_select(const std::vector<CoverageSet>& candidates, int k);

struct ViewSelection {
  std::vector<int> view_ids;
  std::vector<AssociationMap> maps;  ///< association map per selected view, same order
};

/// Builds each candidate's association map over `frame` and selects greedily.
ViewSelection greedy_view_selection(const std::vector<View>& candidates, const VoxelFrame& frame,
                                    int k, int downsample, double depth_threshold);

/// Fraction of annotated voxels of `labels` associated in at least one map.
/// Throws GeometryError when `labels` holds no annotated voxel.
double compute_coverage(std::span<const AssociationMap> maps, const LabelGrid& labels);

}  // namespace vv::geo
