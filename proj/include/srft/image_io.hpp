#pragma once

#include <string>
#include <utility>
#include <vector>

#include "srft/tensor.hpp"

namespace srft {

/// Binary netpbm only: P6 -> (1,3,H,W), P5 -> (1,1,H,W), values scaled to
/// [0,1]. maxval must be 255. Malformed input is rejected with the byte
/// offset of the problem.
Tensor decode_image(const std::vector<unsigned char>& bytes);

/// (1,3,H,W) -> P6, (1,1,H,W) -> P5, canonical header, values clamped to
/// [0,1] and rounded half away from zero to 8 bits.
std::vector<unsigned char> encode_image(const Tensor& t);

Tensor load_image(const std::string& path);
void save_image(const Tensor& t, const std::string& path);

/// All .ppm/.pgm files in `dir`, sorted by filename. The string is the bare
/// filename without extension.
std::vector<std::pair<std::string, Tensor>> load_image_dir(const std::string& dir);

}  // namespace srft
