#include "rtidp/binary_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "rtidp/types.h"

namespace rtidp {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void BinaryWriter::U32(uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf_.append(b, 4);
}

void BinaryWriter::F32(double v) {
  float f = static_cast<float>(v);
  char b[4];
  std::memcpy(b, &f, 4);
  buf_.append(b, 4);
}

void BinaryWriter::F32s(const double* v, size_t n) {
  for (size_t i = 0; i < n; ++i) F32(v[i]);
}

void BinaryWriter::String(std::string_view s) {
  U32(static_cast<uint32_t>(s.size()));
  Bytes(s);
}

void BinaryWriter::WriteFile(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BinaryReader BinaryReader::FromFile(const std::string& path) {
  return BinaryReader(ReadFileBytes(path));
}

void BinaryReader::Need(size_t n, const char* what) const {
  if (pos_ + n > data_.size()) {
    throw FormatError("truncated input at offset " + std::to_string(pos_) +
                      " while reading " + what);
  }
}

void BinaryReader::ExpectMagic(std::string_view magic) {
  Need(magic.size(), "magic");
  if (std::string_view(data_).substr(pos_, magic.size()) != magic) {
    throw FormatError("bad magic at offset " + std::to_string(pos_) +
                      ", expected \"" + std::string(magic) + "\"");
  }
  pos_ += magic.size();
}

uint32_t BinaryReader::U32() {
  Need(4, "u32");
  uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

double BinaryReader::F32() {
  Need(4, "f32");
  float f;
  std::memcpy(&f, data_.data() + pos_, 4);
  pos_ += 4;
  return f;
}

void BinaryReader::F32s(double* out, size_t n) {
  Need(4 * n, "f32 array");
  for (size_t i = 0; i < n; ++i) out[i] = F32();
}

std::string BinaryReader::String() {
  uint32_t n = U32();
  Need(n, "string");
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

void BinaryReader::ExpectEnd() const {
  if (pos_ != data_.size()) {
    throw FormatError("trailing bytes at offset " + std::to_string(pos_));
  }
}

}  // namespace rtidp
