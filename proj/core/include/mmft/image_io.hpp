#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mmft/tensor.hpp"

namespace mmft {

/// Decodes binary PGM (P5, -> [1,H,W]) or PPM (P6, -> [3,H,W]) with maxval 255.
/// Values are scaled to [0,1] and stored channel-major.
Tensor decode_pnm(std::string_view bytes);

/// Encodes a 1-channel tensor as P5 or a 3-channel tensor as P6. Values are
/// clamped to [0,1] and quantized with round(v * 255).
std::string encode_pnm(const Tensor& image);

Tensor load_image(const std::filesystem::path& path);
void save_image(const Tensor& image, const std::filesystem::path& path);

}  // namespace mmft
