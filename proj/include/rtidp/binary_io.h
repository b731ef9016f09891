#ifndef RTIDP_BINARY_IO_H_
#define RTIDP_BINARY_IO_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rtidp {

// Little-endian writer used by the checkpoint and dataset formats.
class BinaryWriter {
 public:
  void Bytes(std::string_view s) { buf_.append(s.data(), s.size()); }
  void U32(uint32_t v);
  void F32(double v);
  void F32s(const double* v, size_t n);
  // u32 length prefix followed by raw bytes.
  void String(std::string_view s);

  const std::string& buffer() const { return buf_; }
  void WriteFile(const std::string& path) const;

 private:
  std::string buf_;
};

// Reads a whole file; throws std::runtime_error naming the path.
std::string ReadFileBytes(const std::string& path);

class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}
  static BinaryReader FromFile(const std::string& path);

  // Throws FormatError naming the offset if the magic does not match.
  void ExpectMagic(std::string_view magic);
  uint32_t U32();
  double F32();
  void F32s(double* out, size_t n);
  std::string String();
  void ExpectEnd() const;

  size_t offset() const { return pos_; }

 private:
  void Need(size_t n, const char* what) const;

  std::string data_;
  size_t pos_ = 0;
};

}  // namespace rtidp

#endif  // RTIDP_BINARY_IO_H_
