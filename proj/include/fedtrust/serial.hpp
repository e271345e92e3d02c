#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedtrust {

struct serial_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical big-endian serialization. Field order is fixed by the caller;
// doubles travel as their IEEE-754 bit pattern, strings as u32 length + bytes.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }

  void u32(uint32_t v) {
    for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  void u64(uint64_t v) {
    for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  void str(const std::string& s) {
    if (s.size() > 0xffffffffULL) throw serial_error("string too long");
    u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  void bytes(const uint8_t* p, size_t n) { buf_.insert(buf_.end(), p, p + n); }

  template <size_t N>
  void fixed(const std::array<uint8_t, N>& a) {
    buf_.insert(buf_.end(), a.begin(), a.end());
  }

  const std::vector<uint8_t>& data() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<uint8_t> buf_;
};

// Bounds-checked reader; corrupt length prefixes surface as serial_error
// instead of wild reads.
class ByteReader {
 public:
  explicit ByteReader(const std::vector<uint8_t>& buf) : buf_(buf) {}

  uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | buf_[pos_++];
    return v;
  }

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | buf_[pos_++];
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  template <size_t N>
  std::array<uint8_t, N> fixed() {
    need(N);
    std::array<uint8_t, N> a;
    std::memcpy(a.data(), buf_.data() + pos_, N);
    pos_ += N;
    return a;
  }

  bool done() const { return pos_ == buf_.size(); }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(size_t n) const {
    if (buf_.size() - pos_ < n) throw serial_error("truncated record");
  }

  const std::vector<uint8_t>& buf_;
  size_t pos_ = 0;
};

}  // namespace fedtrust
