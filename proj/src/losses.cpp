// SPDX-License-Identifier: Apache-2.0
#include "forplane/losses.hpp"

namespace forplane {

DepthMode parse_depth_mode(const std::string& s) {
  if (s == "stereo") return DepthMode::Stereo;
  if (s == "monocular") return DepthMode::Monocular;
  if (s == "none") return DepthMode::None;
  throw UsageError("unknown loss.depth_mode '" + s + "'");
}

std::string to_string(DepthMode m) {
  switch (m) {
    case DepthMode::Stereo: return "stereo";
    case DepthMode::Monocular: return "monocular";
    case DepthMode::None: return "none";
  }
  return "stereo";
}

}  // namespace forplane
