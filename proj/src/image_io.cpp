#include "cropgan/image_io.hpp"

#include <fstream>

#include "cropgan/errors.hpp"

namespace cropgan {

namespace {

constexpr std::uint8_t kCorn[3] = {0, 170, 0};
constexpr std::uint8_t kOther[3] = {255, 255, 255};
constexpr std::uint8_t kError[3] = {220, 0, 0};

// Reads one whitespace-delimited PNM header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  if (tok.empty()) {
    throw FormatError(path + ": truncated PNM header", static_cast<long long>(in.tellg()));
  }
  return tok;
}

}  // namespace

Raster8 Raster8::filled(int width, int height, std::uint8_t value) {
  Raster8 r;
  r.width = width;
  r.height = height;
  r.pixels.assign(static_cast<std::size_t>(width) * height, value);
  return r;
}

void write_pgm(const std::string& path, const Raster8& raster) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << "P5\n" << raster.width << " " << raster.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.pixels.data()),
            static_cast<std::streamsize>(raster.pixels.size()));
  if (!out) throw UsageError("short write to " + path);
}

Raster8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  if (next_token(in, path) != "P5") throw FormatError(path + ": not a binary PGM (P5)", 0);
  Raster8 r;
  try {
    r.width = std::stoi(next_token(in, path));
    r.height = std::stoi(next_token(in, path));
    const int maxval = std::stoi(next_token(in, path));
    if (maxval <= 0 || maxval > 255) {
      throw FormatError(path + ": unsupported PGM maxval", static_cast<long long>(in.tellg()));
    }
  } catch (const std::invalid_argument&) {
    throw FormatError(path + ": malformed PGM header", static_cast<long long>(in.tellg()));
  }
  if (r.width <= 0 || r.height <= 0) {
    throw FormatError(path + ": non-positive PGM dimensions", static_cast<long long>(in.tellg()));
  }
  r.pixels.resize(static_cast<std::size_t>(r.width) * r.height);
  in.read(reinterpret_cast<char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(r.pixels.size())) {
    throw FormatError(path + ": truncated PGM pixel data",
                      static_cast<long long>(in.tellg()));
  }
  return r;
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw UsageError("ppm payload size does not match dimensions");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw UsageError("short write to " + path);
}

void render_map(const Raster8& classes, const std::string& path) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(classes.width) * classes.height * 3);
  for (std::size_t i = 0; i < classes.pixels.size(); ++i) {
    const std::uint8_t* color = classes.pixels[i] != 0 ? kCorn : kOther;
    rgb[i * 3] = color[0];
    rgb[i * 3 + 1] = color[1];
    rgb[i * 3 + 2] = color[2];
  }
  write_ppm(path, classes.width, classes.height, rgb);
}

void render_error_map(const Raster8& pred, const Raster8& truth, const std::string& path) {
  if (pred.width != truth.width || pred.height != truth.height) {
    throw UsageError("error map rasters are misaligned: " + std::to_string(pred.width) + "x" +
                     std::to_string(pred.height) + " vs " + std::to_string(truth.width) + "x" +
                     std::to_string(truth.height));
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(pred.width) * pred.height * 3);
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool mismatch = (pred.pixels[i] != 0) != (truth.pixels[i] != 0);
    const std::uint8_t* color = mismatch ? kError : kOther;
    rgb[i * 3] = color[0];
    rgb[i * 3 + 1] = color[1];
    rgb[i * 3 + 2] = color[2];
  }
  write_ppm(path, pred.width, pred.height, rgb);
}

}  // namespace cropgan
