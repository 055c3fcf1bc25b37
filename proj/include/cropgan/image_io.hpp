#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cropgan {

// Single-channel 8-bit raster, row-major from the top-left pixel.
struct Raster8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  static Raster8 filled(int width, int height, std::uint8_t value);
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Binary PGM (P5), maxval 255. Masks use 0 = clear and 255 = set; readers
// treat any nonzero byte as set.
void write_pgm(const std::string& path, const Raster8& raster);
Raster8 read_pgm(const std::string& path);

void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb);

// Class map: corn (0,170,0) on white. Input pixels are 0/1 class ids.
void render_map(const Raster8& classes, const std::string& path);
// Error map: misclassified pixels in red (220,0,0) on white.
void render_error_map(const Raster8& pred, const Raster8& truth, const std::string& path);

}  // namespace cropgan
