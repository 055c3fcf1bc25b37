#include "cropgan/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace cropgan {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;

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

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  long long offset() const { return static_cast<long long>(pos_); }

  void need(std::size_t n, const char* what) {
    if (pos_ + n > buf_.size()) {
      throw FormatError(path_ + ": truncated checkpoint while reading " + std::string(what),
                        offset());
    }
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& buf) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw UsageError("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw UsageError("cannot move " + tmp + " into place");
  }
}

}  // namespace

const std::string* Checkpoint::find_meta(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

void save_checkpoint(Network& network, const std::string& path, std::uint32_t epoch,
                     const std::vector<std::pair<std::string, std::string>>& metadata) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u16(buf, kVersion);
  buf.push_back(static_cast<char>(network.role));
  put_u32(buf, epoch);

  const std::vector<Tensor*> tensors = network.state_tensors();
  put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    buf.push_back(static_cast<char>(t->rank()));
    for (int d : t->shape) put_u32(buf, static_cast<std::uint32_t>(d));
  }
  for (const Tensor* t : tensors) {
    for (double v : t->data) put_f64(buf, v);
  }

  put_u32(buf, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    const std::string line = k + "=" + v;
    put_u32(buf, static_cast<std::uint32_t>(line.size()));
    buf.append(line);
  }

  write_file_atomic(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string buf = read_file(path);
  Reader r(buf, path);

  const std::string magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError(path + ": bad checkpoint magic", 0);
  }
  const std::uint16_t version = r.u16("version");
  if (version != kVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version), 4);
  }
  const std::uint8_t role_byte = r.u8("role");
  if (role_byte > static_cast<std::uint8_t>(NetworkRole::CropMapper)) {
    throw FormatError(path + ": unknown network role " + std::to_string(role_byte), 6);
  }

  Checkpoint ckpt;
  ckpt.role = static_cast<NetworkRole>(role_byte);
  ckpt.epoch = r.u32("epoch");

  const std::uint32_t count = r.u32("tensor count");
  std::vector<Shape> shapes;
  shapes.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t ndim = r.u8("tensor rank");
    if (ndim == 0 || ndim > 4) {
      throw FormatError(path + ": manifest rank " + std::to_string(ndim) + " out of range",
                        r.offset() - 1);
    }
    Shape s;
    for (int d = 0; d < ndim; ++d) {
      const std::uint32_t dim = r.u32("tensor dim");
      if (dim == 0) throw FormatError(path + ": zero dimension in manifest", r.offset() - 4);
      s.push_back(static_cast<int>(dim));
    }
    shapes.push_back(std::move(s));
  }
  for (const Shape& s : shapes) {
    const long long n = numel(s);
    Tensor t = Tensor::zeros(s);
    for (long long i = 0; i < n; ++i) t.data[static_cast<std::size_t>(i)] = r.f64("tensor data");
    ckpt.tensors.push_back(std::move(t));
  }

  const std::uint32_t meta_count = r.u32("metadata count");
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    const std::uint32_t len = r.u32("metadata length");
    const std::string line = r.bytes(len, "metadata line");
    const std::size_t sep = line.find('=');
    if (sep == std::string::npos) {
      throw FormatError(path + ": metadata line without '='", r.offset() - len);
    }
    ckpt.metadata.emplace_back(line.substr(0, sep), line.substr(sep + 1));
  }
  if (!r.done()) {
    throw FormatError(path + ": trailing bytes after checkpoint payload", r.offset());
  }
  return ckpt;
}

Network network_from_checkpoint(const Checkpoint& ckpt) {
  Network net = build_network(ckpt.role, 0);
  const std::vector<Tensor*> slots = net.state_tensors();
  if (slots.size() != ckpt.tensors.size()) {
    throw FormatError("checkpoint tensor count " + std::to_string(ckpt.tensors.size()) +
                          " does not match the " + std::string(role_name(ckpt.role)) +
                          " architecture (" + std::to_string(slots.size()) + ")",
                      11);
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i]->shape != ckpt.tensors[i].shape) {
      throw FormatError("checkpoint tensor " + std::to_string(i) + " has shape " +
                            shape_str(ckpt.tensors[i].shape) + ", expected " +
                            shape_str(slots[i]->shape),
                        11);
    }
    slots[i]->data = ckpt.tensors[i].data;
  }
  return net;
}

Network load_network(const std::string& path) { return network_from_checkpoint(load_checkpoint(path)); }

}  // namespace cropgan
