// SPDX-License-Identifier: Apache-2.0
#include "forplane/encoding.hpp"

namespace forplane {

EncodingKind parse_encoding_kind(const std::string& s) {
  if (s == "oneblob") return EncodingKind::OneBlob;
  if (s == "frequency") return EncodingKind::Frequency;
  if (s == "dummy") return EncodingKind::Dummy;
  if (s == "direction") return EncodingKind::Direction;
  throw UsageError("unknown encoding.kind '" + s + "'");
}

std::string to_string(EncodingKind k) {
  switch (k) {
    case EncodingKind::OneBlob: return "oneblob";
    case EncodingKind::Frequency: return "frequency";
    case EncodingKind::Dummy: return "dummy";
    case EncodingKind::Direction: return "direction";
  }
  return "oneblob";
}

void validate(const OneBlobConfig& cfg) {
  if (cfg.bins < 2) throw UsageError("encoding.bins must be >= 2");
  if (!(cfg.sigma > 0.0)) throw UsageError("encoding.sigma must be > 0");
}

}  // namespace forplane
