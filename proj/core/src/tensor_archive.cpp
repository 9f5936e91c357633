#include "depthcod/tensor_archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <torch/torch.h>

#include "depthcod/error.hpp"

static_assert(std::endian::native == std::endian::little, "archive format assumes little-endian");

namespace depthcod {
namespace {

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    case torch::kInt32: return 4;
    default: throw Error(ErrorCode::BadConfig, "unsupported tensor dtype for archive");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    case 4: return torch::kInt32;
    default: throw Error(ErrorCode::CorruptArchive, "unknown dtype code " + std::to_string(code));
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const char* take(std::size_t n) {
    need(n);
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw Error(ErrorCode::CorruptArchive, "archive is truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_tensor_archive(const std::filesystem::path& path, const TensorArchive& archive,
                          const char (&magic)[9]) {
  Writer w;
  w.raw(magic, 8);
  w.str(archive.version);
  w.pod<std::uint64_t>(archive.meta.size());
  for (const auto& [k, v] : archive.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod<std::uint64_t>(archive.tensors.size());
  for (const auto& [name, tensor] : archive.tensors) {
    const auto t = tensor.detach().cpu().contiguous();
    w.str(name);
    w.pod<std::uint8_t>(dtype_code(t.scalar_type()));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
    for (const auto s : t.sizes()) w.pod<std::int64_t>(s);
    const auto nbytes = static_cast<std::uint64_t>(t.numel() * t.element_size());
    w.pod<std::uint64_t>(nbytes);
    if (nbytes > 0) w.raw(t.data_ptr(), nbytes);
  }
  const auto checksum = fnv1a(w.buffer());
  w.pod<std::uint64_t>(checksum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive read_tensor_archive(const std::filesystem::path& path, const char (&magic)[9]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 + sizeof(std::uint64_t))
    throw Error(ErrorCode::CorruptArchive, path.string() + " is too short");
  if (std::memcmp(buf.data(), magic, 8) != 0)
    throw Error(ErrorCode::CorruptArchive, path.string() + " has the wrong magic header");

  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  // Verify before parsing so damaged sizes never drive allocations.
  if (fnv1a(std::string_view(buf).substr(0, body)) != stored)
    throw Error(ErrorCode::CorruptArchive, "checksum mismatch in " + path.string());
  Reader r(buf, body);
  r.take(8);

  TensorArchive archive;
  archive.version = r.str();
  const auto meta_count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < meta_count; ++i) {
    auto k = r.str();
    archive.meta[k] = r.str();
  }
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = r.str();
    const auto dtype = dtype_from_code(r.pod<std::uint8_t>());
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim > 16) throw Error(ErrorCode::CorruptArchive, "implausible tensor rank");
    std::vector<int64_t> dims(ndim);
    for (auto& d : dims) {
      d = r.pod<std::int64_t>();
      if (d < 0) throw Error(ErrorCode::CorruptArchive, "negative tensor dimension");
    }
    const auto nbytes = r.pod<std::uint64_t>();
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (nbytes != static_cast<std::uint64_t>(t.numel() * t.element_size()))
      throw Error(ErrorCode::CorruptArchive, "byte count does not match shape for " + name);
    const char* src = r.take(nbytes);
    if (nbytes > 0) std::memcpy(t.data_ptr(), src, nbytes);
    archive.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw Error(ErrorCode::CorruptArchive, "trailing bytes in " + path.string());
  return archive;
}

}  // namespace depthcod
