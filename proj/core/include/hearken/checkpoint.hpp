#pragma once

#include <string>

#include "hearken/params.hpp"

namespace hearken {

// Checkpoint container: a versioned header, a text manifest listing
// (name, shape, trainable flag, byte offset into the data section), a DATA
// marker, then raw little-endian float64 payloads back to back.
//
//   hearken-checkpoint v1
//   count <n>
//   <name> <ndim> <d0> [<d1>] <trainable 0|1> <offset>
//   ...
//   DATA
//   <binary>
std::string serialize_params(const ParamRegistry& reg);
ParamRegistry deserialize_params(const std::string& bytes);

void save_checkpoint(const std::string& path, const ParamRegistry& reg);
ParamRegistry load_checkpoint(const std::string& path);

}  // namespace hearken
