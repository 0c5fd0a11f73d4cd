#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edtk/tensor.hpp"

namespace edtk {

/// Binary PPM (P6, maxval 255) to a 3 x H x W tensor in [0, 1].
Tensor decode_ppm(const std::vector<std::uint8_t>& bytes);
Tensor read_ppm(const std::string& path);

/// 3 x H x W tensor, values clamped to [0, 1], as P6.
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

}  // namespace edtk
