#include "unisparse/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "tensor file I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace unisparse {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("tensor file " + path.string() + ": " + what);
}

void write_u32(std::ofstream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const HeadStack<float>& data) {
  if (data.empty()) fail(path, "refusing to write empty head stack");
  const Index L = data[0].rows();
  const Index d_k = data[0].cols();
  for (const auto& m : data)
    if (m.rows() != L || m.cols() != d_k) fail(path, "heads disagree on shape");
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(path, "cannot open for writing");
  os.write(kTensorMagic, sizeof(kTensorMagic));
  write_u32(os, kTensorVersion);
  write_u32(os, std::uint32_t(data.size()));
  write_u32(os, std::uint32_t(L));
  write_u32(os, std::uint32_t(d_k));
  for (const auto& m : data)
    os.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(float)) * L * d_k);
  if (!os) fail(path, "write failed");
}

TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(path, "cannot open for reading");
  char magic[sizeof(kTensorMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kTensorMagic, sizeof(magic)) != 0)
    fail(path, "bad magic at offset 0");
  const std::uint32_t version = read_u32(is);
  if (!is || version != kTensorVersion)
    fail(path, "unsupported version " + std::to_string(version) + " at offset 12");
  const std::uint32_t H = read_u32(is);
  const std::uint32_t L = read_u32(is);
  const std::uint32_t d_k = read_u32(is);
  if (!is) fail(path, "truncated header");
  if (H == 0 || L == 0 || d_k == 0) fail(path, "zero dimension in header at offset 16");

  TensorFile t;
  t.H = int(H);
  t.L = int(L);
  t.d_k = int(d_k);
  t.data.reserve(H);
  for (std::uint32_t h = 0; h < H; ++h) {
    MatrixRMf m(L, d_k);
    is.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(float)) * L * d_k);
    if (is.gcount() != std::streamsize(sizeof(float)) * L * d_k)
      fail(path, "payload shorter than header H*L*d_k at offset " +
                     std::to_string(28 + std::uint64_t(sizeof(float)) * h * L * d_k));
    t.data.push_back(std::move(m));
  }
  is.peek();
  if (!is.eof()) fail(path, "trailing bytes beyond header H*L*d_k");
  return t;
}

}  // namespace unisparse
