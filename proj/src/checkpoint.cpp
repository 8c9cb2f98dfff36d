#include "mmvdn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmvdn {
namespace {

constexpr char kMagic[4] = {'M', 'M', 'V', 'D'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw std::runtime_error(std::string("checkpoint truncated while reading ") + what + " at byte " +
                               std::to_string(pos_));
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_container(const std::vector<NamedTensor>& tensors) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out += nt.name;
    const Shape& s = nt.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    for (int e : s) put_u32(out, static_cast<std::uint32_t>(e));
    for (float f : nt.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

std::vector<NamedTensor> decode_container(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string_view(kMagic, 4)) throw std::runtime_error("checkpoint: bad magic (expected MMVD)");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = r.u32("name length");
    std::string name(r.take(name_len, "name"));
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw std::runtime_error("checkpoint: tensor '" + name + "' has invalid rank " + std::to_string(rank));
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t e = r.u32("extent");
      if (e == 0 || e > (1u << 30)) throw std::runtime_error("checkpoint: tensor '" + name + "' has invalid extent " + std::to_string(e));
      shape.push_back(static_cast<int>(e));
      n *= e;
    }
    if (n > r.remaining() / 4) throw std::runtime_error("checkpoint truncated in payload of tensor '" + name + "'");
    std::vector<float> data(n);
    for (float& f : data) f = std::bit_cast<float>(r.u32("payload"));
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (r.remaining() != 0) {
    throw std::runtime_error("checkpoint: " + std::to_string(r.remaining()) + " trailing bytes after last tensor");
  }
  return out;
}

void write_container(const std::string& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  const std::string bytes = encode_container(tensors);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<NamedTensor> read_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return decode_container(buf.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<NamedTensor> to_named(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  for (const auto& p : params) out.push_back({p->name, p->value});
  return out;
}

ParameterSet to_parameters(const std::vector<NamedTensor>& tensors) {
  ParameterSet params;
  for (const auto& nt : tensors) params.add(nt.name, nt.tensor);
  return params;
}

const Tensor* try_find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const auto& nt : tensors) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name) {
  if (const Tensor* t = try_find_tensor(tensors, name)) return *t;
  throw std::runtime_error("checkpoint has no tensor named '" + name + "'");
}

}  // namespace mmvdn
