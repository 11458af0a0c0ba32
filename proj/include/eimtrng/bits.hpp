#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace eimtrng {

// Packed bit vector, LSB-first inside each 64-bit word. Bit i lives in
// word i/64 at position i%64; the byte serialization is little-endian so
// bit i of the vector is bit i%8 of byte i/8.
class BitVector {
 public:
  BitVector() = default;
  explicit BitVector(std::size_t nbits, bool fill = false)
      : nbits_(nbits), words_((nbits + 63) / 64, fill ? ~0ull : 0ull) {
    trim();
  }

  std::size_t size() const { return nbits_; }
  bool empty() const { return nbits_ == 0; }

  bool get(std::size_t i) const {
    check(i);
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  void set(std::size_t i, bool v) {
    check(i);
    std::uint64_t mask = 1ull << (i & 63);
    if (v)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  void flip(std::size_t i) {
    check(i);
    words_[i >> 6] ^= 1ull << (i & 63);
  }

  void fill(bool v) {
    for (auto& w : words_) w = v ? ~0ull : 0ull;
    trim();
  }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto w : words_) n += std::popcount(w);
    return n;
  }

  BitVector& operator^=(const BitVector& other) {
    if (other.nbits_ != nbits_) throw std::invalid_argument("BitVector xor: length mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
  }

  friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }

  std::size_t hamming(const BitVector& other) const {
    if (other.nbits_ != nbits_) throw std::invalid_argument("BitVector hamming: length mismatch");
    std::size_t n = 0;
    for (std::size_t i = 0; i < words_.size(); ++i)
      n += std::popcount(words_[i] ^ other.words_[i]);
    return n;
  }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((nbits_ + 7) / 8, 0);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<std::uint8_t>(words_[i >> 3] >> ((i & 7) * 8));
    return out;
  }

  static BitVector from_bytes(const std::vector<std::uint8_t>& bytes, std::size_t nbits) {
    if (bytes.size() < (nbits + 7) / 8)
      throw std::invalid_argument("BitVector::from_bytes: too few bytes");
    BitVector v(nbits);
    for (std::size_t i = 0; i < (nbits + 7) / 8; ++i)
      v.words_[i >> 3] |= static_cast<std::uint64_t>(bytes[i]) << ((i & 7) * 8);
    v.trim();
    return v;
  }

  friend bool operator==(const BitVector&, const BitVector&) = default;

 private:
  void check(std::size_t i) const {
    if (i >= nbits_) throw std::out_of_range("BitVector index out of range");
  }
  void trim() {
    if (nbits_ & 63) words_.back() &= (1ull << (nbits_ & 63)) - 1;
  }

  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace eimtrng
