#pragma once

#include <string>
#include <vector>

#include "srft/degradation.hpp"
#include "srft/model.hpp"

namespace srft {

/// Binary model container. Little-endian throughout:
///   "SRFT" | u16 version=1 | u32 spec text len + bytes |
///   u32 param count | per param: u16 name len + bytes, u8 rank=4,
///   4x u32 dims, then float32 data.
std::vector<unsigned char> encode_model(const Model& m);
Model decode_model(const std::vector<unsigned char>& bytes);
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

/// Kernel spec text, one of:
///   gaussian <sigma_x> <sigma_y> <theta> <support>
///   disk <radius> <support>
///   explicit <support> followed by support^2 whitespace-separated values
/// Numeric fields round-trip exactly.
std::string serialize_kernel(const KernelSpec& k);
KernelSpec parse_kernel(const std::string& text);
KernelSpec load_kernel(const std::string& path);
void save_kernel(const KernelSpec& k, const std::string& path);

}  // namespace srft
