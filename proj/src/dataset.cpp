#include "cropgan/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace cropgan {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'T', 'S'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagLabels = 0x01;
constexpr std::uint8_t kFlagCoords = 0x02;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Cursor {
  const std::string& buf;
  const std::string& path;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) {
    if (pos + n > buf.size()) {
      throw FormatError(path + ": truncated dataset while reading " + std::string(what),
                        static_cast<long long>(pos));
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

}  // namespace

void LabeledDataset::validate() const {
  if (labeled() && labels.size() != samples.size()) {
    throw UsageError("dataset labels length " + std::to_string(labels.size()) +
                     " does not match sample count " + std::to_string(samples.size()));
  }
  if (has_coords() && coords.size() != samples.size()) {
    throw UsageError("dataset coords length does not match sample count");
  }
  for (std::uint8_t l : labels) {
    if (l > 1) throw UsageError("labels must be 0 or 1");
  }
  for (const Sample& s : samples) {
    for (double v : s) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw UsageError("sample values must lie in [0,1]");
      }
    }
  }
}

Tensor to_batch(const LabeledDataset& ds, const std::vector<int>& indices) {
  Tensor batch = Tensor::zeros({static_cast<int>(indices.size()), kTimesteps, kBands, 1});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Sample& s = ds.samples[static_cast<std::size_t>(indices[i])];
    std::memcpy(&batch.data[i * kSampleSize], s.data(), sizeof(double) * kSampleSize);
  }
  return batch;
}

Tensor to_batch(const LabeledDataset& ds) {
  std::vector<int> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  return to_batch(ds, idx);
}

void write_dataset(const std::string& path, const LabeledDataset& ds) {
  ds.validate();
  std::string buf;
  buf.append(kMagic, 4);
  put_u16(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(ds.size()));
  put_u16(buf, kTimesteps);
  put_u16(buf, kBands);
  std::uint8_t flags = 0;
  if (ds.labeled()) flags |= kFlagLabels;
  if (ds.has_coords()) flags |= kFlagCoords;
  buf.push_back(static_cast<char>(flags));
  for (const Sample& s : ds.samples) {
    for (double v : s) put_f64(buf, v);
  }
  if (ds.labeled()) {
    for (std::uint8_t l : ds.labels) buf.push_back(static_cast<char>(l));
  }
  if (ds.has_coords()) {
    for (const auto& [x, y] : ds.coords) {
      put_u32(buf, x);
      put_u32(buf, y);
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw UsageError("short write to " + path);
}

LabeledDataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Cursor c{buf, path};

  c.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError(path + ": bad dataset magic", 0);
  c.pos = 4;
  const std::uint16_t version = c.u16("version");
  if (version != kVersion) {
    throw FormatError(path + ": unsupported dataset version " + std::to_string(version), 4);
  }
  const std::uint32_t count = c.u32("sample count");
  const std::uint16_t timesteps = c.u16("timesteps");
  const std::uint16_t bands = c.u16("bands");
  if (timesteps != kTimesteps || bands != kBands) {
    throw FormatError(path + ": expected 9x6 samples, file declares " + std::to_string(timesteps) +
                          "x" + std::to_string(bands),
                      10);
  }
  const std::uint8_t flags = c.u8("flags");
  if ((flags & ~(kFlagLabels | kFlagCoords)) != 0) {
    throw FormatError(path + ": unknown flag bits", 14);
  }

  LabeledDataset ds;
  ds.samples.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (int j = 0; j < kSampleSize; ++j) {
      const long long at = static_cast<long long>(c.pos);
      const double v = c.f64("sample values");
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw FormatError(path + ": sample value outside [0,1]", at);
      }
      ds.samples[i][static_cast<std::size_t>(j)] = v;
    }
  }
  if (flags & kFlagLabels) {
    ds.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const long long at = static_cast<long long>(c.pos);
      const std::uint8_t l = c.u8("labels");
      if (l > 1) throw FormatError(path + ": label byte must be 0 or 1", at);
      ds.labels[i] = l;
    }
  }
  if (flags & kFlagCoords) {
    ds.coords.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      ds.coords[i].first = c.u32("coords");
      ds.coords[i].second = c.u32("coords");
    }
  }
  if (c.pos != buf.size()) {
    throw FormatError(path + ": trailing bytes after dataset payload",
                      static_cast<long long>(c.pos));
  }
  return ds;
}

}  // namespace cropgan
