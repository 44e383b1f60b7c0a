#pragma once

#include <filesystem>

#include "dnfs/data.hpp"

namespace dnfs {

/// Binary PGM ("P5"), maxval 255, row-major. Real values in [0, 1] quantize
/// as round(v * 255). Masks store boundary = 0 (black) on background = 255
/// (white); reading inverts the mapping.
void write_pgm(const std::filesystem::path& path, const GridF& grid);
GridF read_pgm(const std::filesystem::path& path);

void write_mask_pgm(const std::filesystem::path& path, const MaskGrid& mask);
MaskGrid read_mask_pgm(const std::filesystem::path& path);

}  // namespace dnfs
