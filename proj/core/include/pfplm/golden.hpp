#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pfplm/error.hpp"

// Golden wire vectors: hex strings with the fields they must decode to.
//
// Document layout (JSON, schema_version 1):
//   packets: [{name, hex, ip{...}, srh{...}|null, payload_hex, color, monitored}]
//   lm:      [{name, hex, message{type: query|response, ...}}]
//   errors:  [{name, kind: packet|lm, hex, error}]
// Positive vectors must decode to the listed fields and re-encode to the
// identical bytes; error vectors must be rejected with the named error.
namespace pfplm::golden {

struct VectorCheck {
  std::string name;
  bool passed = false;
  std::string detail;  // first difference when failed
};

/// Throws ConfigError if the document itself is malformed.
std::vector<VectorCheck> verify_vectors(std::string_view json_text);

/// The built-in vector set, encoded by this library, as a JSON document.
std::string dump_vectors();

/// snake_case names used in the "error" field, e.g. "invalid_srh".
std::string_view error_name(CodecErrc code);
std::string_view error_name(LmErrc code);

}  // namespace pfplm::golden
