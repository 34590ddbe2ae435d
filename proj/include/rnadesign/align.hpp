#pragma once

#include <vector>

#include "rnadesign/geom.hpp"

namespace rnadesign {

using Coords = std::vector<Vec3>;

// Minimal RMSD over rigid superposition of a onto b: centroids removed,
// optimal rotation from the SVD of the cross-covariance with reflection
// correction. Requires equal lengths, n >= 3.
double kabsch_rmsd(const Coords& a, const Coords& b);

// The optimal rotation itself (applied to centered a to match centered b).
Mat3 kabsch_rotation(const Coords& a, const Coords& b);

// Length-dependent TM-score scale for RNA, floored at 0.3.
double tm_d0(std::size_t n);

// (1/n) sum 1/(1 + (d_i/d0)^2) under the Kabsch superposition. Equal lengths.
double tm_score(const Coords& a, const Coords& b);

}  // namespace rnadesign
