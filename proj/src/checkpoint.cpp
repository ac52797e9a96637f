#include "unerf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "unerf/errors.hpp"

namespace unerf {

static_assert(std::endian::native == std::endian::little, "checkpoint layout assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'U', 'N', 'E', 'R', 'F', 'C', 'K', 'P'};

class Writer {
 public:
  template <typename I>
  void scalar(I v) {
    raw(&v, sizeof v);
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void string(const std::string& s) {
    scalar<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  std::vector<unsigned char>& bytes() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n, std::string where) : p_(p), n_(n), where_(std::move(where)) {}
  template <typename I>
  I scalar() {
    I v;
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* out, std::size_t n) {
    if (n > n_ - pos_) throw ParseError(where_ + ": truncated checkpoint");
    std::memcpy(out, p_ + pos_, n);
    pos_ += n;
  }
  std::string string() {
    const auto n = scalar<std::uint64_t>();
    if (n > n_ - pos_) throw ParseError(where_ + ": truncated checkpoint");
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == n_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
  std::string where_;
};

std::size_t dtype_size(NamedArray::Dtype d) { return d == NamedArray::Dtype::F32 ? 4 : 8; }

template <typename T>
NamedArray make_array(const std::string& name, const Shape& shape, const T* data, std::size_t n) {
  NamedArray a;
  a.name = name;
  a.shape = shape;
  a.dtype = sizeof(T) == 4 ? NamedArray::Dtype::F32 : NamedArray::Dtype::F64;
  a.bytes.resize(n * sizeof(T));
  std::memcpy(a.bytes.data(), data, a.bytes.size());
  return a;
}

template <typename T>
void copy_out(const Checkpoint& c, const std::string& name, Tensor<T>& out) {
  const NamedArray& a = c.find(name);
  const auto want = sizeof(T) == 4 ? NamedArray::Dtype::F32 : NamedArray::Dtype::F64;
  if (a.dtype != want) throw ParseError("checkpoint array '" + name + "' has the wrong element type");
  if (a.shape != out.shape()) {
    throw ParseError("checkpoint array '" + name + "' has shape " + shape_str(a.shape) + ", expected " +
                     shape_str(out.shape()));
  }
  std::memcpy(out.data(), a.bytes.data(), a.bytes.size());
}

}  // namespace

void Checkpoint::put(const std::string& name, const Tensor<float>& t) {
  arrays.push_back(make_array(name, t.shape(), t.data(), t.numel()));
}
void Checkpoint::put(const std::string& name, const Tensor<double>& t) {
  arrays.push_back(make_array(name, t.shape(), t.data(), t.numel()));
}
void Checkpoint::put(const std::string& name, const std::vector<double>& v) {
  arrays.push_back(make_array(name, {v.size()}, v.data(), v.size()));
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

const NamedArray& Checkpoint::find(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  throw ParseError("checkpoint has no array named '" + name + "'");
}

void Checkpoint::get(const std::string& name, Tensor<float>& out) const { copy_out(*this, name, out); }
void Checkpoint::get(const std::string& name, Tensor<double>& out) const { copy_out(*this, name, out); }

std::vector<double> Checkpoint::get_vector(const std::string& name) const {
  const NamedArray& a = find(name);
  if (a.dtype != NamedArray::Dtype::F64 || a.shape.size() != 1) {
    throw ParseError("checkpoint array '" + name + "' is not a double vector");
  }
  std::vector<double> v(a.shape[0]);
  std::memcpy(v.data(), a.bytes.data(), a.bytes.size());
  return v;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.scalar<std::uint32_t>(kCheckpointVersion);
  w.string(ckpt.config);
  w.scalar<std::uint64_t>(ckpt.counter);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const NamedArray& a : ckpt.arrays) {
    if (a.bytes.size() != shape_numel(a.shape) * dtype_size(a.dtype)) {
      throw ContractError("checkpoint array '" + a.name + "' size does not match its shape");
    }
    w.string(a.name);
    w.scalar<std::uint8_t>(static_cast<std::uint8_t>(a.dtype));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) w.scalar<std::uint64_t>(d);
    w.raw(a.bytes.data(), a.bytes.size());
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, w.bytes().data(), static_cast<uInt>(w.bytes().size())));
  w.scalar<std::uint32_t>(crc);

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("write failed for checkpoint " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (data.size() < sizeof kMagic + 4 + 4 || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError(where + ": not a checkpoint file");
  }
  std::uint32_t version;
  std::memcpy(&version, data.data() + sizeof kMagic, 4);
  if (version != kCheckpointVersion) {
    throw ParseError(where + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = data.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, data.data() + body, 4);
  const auto actual = static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(body)));
  if (stored != actual) throw ParseError(where + ": checksum mismatch, checkpoint is corrupt");

  Reader r(data.data() + sizeof kMagic + 4, body - sizeof kMagic - 4, where);
  Checkpoint c;
  c.config = r.string();
  c.counter = r.scalar<std::uint64_t>();
  const auto count = r.scalar<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.string();
    const auto dt = r.scalar<std::uint8_t>();
    if (dt != 1 && dt != 2) throw ParseError(where + ": unknown element type in array '" + a.name + "'");
    a.dtype = static_cast<NamedArray::Dtype>(dt);
    const auto rank = r.scalar<std::uint32_t>();
    if (rank > 8) throw ParseError(where + ": implausible rank in array '" + a.name + "'");
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(r.scalar<std::uint64_t>());
    a.bytes.resize(shape_numel(a.shape) * dtype_size(a.dtype));
    r.raw(a.bytes.data(), a.bytes.size());
    c.arrays.push_back(std::move(a));
  }
  if (!r.done()) throw ParseError(where + ": trailing bytes in checkpoint");
  return c;
}

}  // namespace unerf
