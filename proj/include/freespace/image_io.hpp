#pragma once

#include <string>

#include "freespace/image.hpp"

namespace freespace {

// Grayscale image files. PGM is P5 binary (16-bit big-endian per the netpbm
// spec); PNG is single-channel 8- or 16-bit. Readers throw FormatError
// naming the violation (wrong magic, bit depth, channel count, truncation).

ImageU8 read_gray8(const std::string& path);
ImageU16 read_gray16(const std::string& path);

void write_gray8(const std::string& path, const ImageU8& img);
void write_gray16(const std::string& path, const ImageU16& img);

// Dispatch on extension (.pgm / .png).
bool has_png_extension(const std::string& path);

}  // namespace freespace
