#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "eimtrng/bits.hpp"
#include "eimtrng/dram_model.hpp"
#include "eimtrng/engine.hpp"
#include "eimtrng/entropy.hpp"
#include "eimtrng/errors.hpp"
#include "eimtrng/rng.hpp"

namespace eimtrng {

struct WeightPage {
  BitVector bits;
  std::uint32_t page_id = 0;
  friend bool operator==(const WeightPage&, const WeightPage&) = default;
};

struct KeyRecord {
  BitVector flip_bitmap;  // every realized flip position in the victim row
  KeyMaterial key_material;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t hc_used = 0;
  std::uint32_t page_id = 0;
};

struct EncodedBundle {
  std::vector<WeightPage> encrypted_pages;  // in shuffled slot order
  std::vector<KeyRecord> key_records;       // in original page order
  std::vector<std::uint32_t> layout;        // layout[slot] = original page index
};

// 256-bit key folded to the shuffle seed.
inline std::uint64_t fold_key(const BitVector& key_bits) {
  auto bytes = key_bits.to_bytes();
  std::uint64_t h = 0x454d4954524e4721ull;
  for (std::size_t i = 0; i < bytes.size(); i += 8) {
    std::uint64_t w = 0;
    for (std::size_t j = 0; j < 8 && i + j < bytes.size(); ++j)
      w |= static_cast<std::uint64_t>(bytes[i + j]) << (8 * j);
    h = mix64(h ^ w);
  }
  return h;
}

// Model-side classification of a victim row at a given HC: cells whose flip
// probability is strictly inside (eps, 1-eps) count as unpredictable for
// window selection.
inline std::vector<CellClass> model_class_row(const DramArray& array, std::uint32_t victim_row,
                                              std::uint64_t hc, double eps = 1e-3) {
  std::vector<CellClass> classes(array.cols(), CellClass::Stable);
  for (const auto& [col, cell] : array.vulnerable_cells(victim_row)) {
    double p = flip_probability(cell, hc, array.temperature());
    if (p >= 1.0 - eps)
      classes[col] = CellClass::Fixed;
    else if (p > eps)
      classes[col] = CellClass::Unpredictable;
  }
  return classes;
}

// Encode pipeline for one page: write the page as the victim, write the
// aggressor pattern around it, hammer, and sense. The sensed row is the
// encryption row: page XOR realized flip bitmap.
inline std::pair<WeightPage, KeyRecord> encode_page(const WeightPage& page, DramArray& array,
                                                    std::uint32_t victim_row, std::uint64_t hc,
                                                    Rng& rng,
                                                    const std::string& aggressor_pattern = "ALL0") {
  if (page.bits.size() != array.cols())
    throw ConfigError("encode_page: page width does not match row width");
  if (victim_row == 0 || victim_row + 1 >= array.rows())
    throw ConfigError("encode_page: victim row must have aggressor rows on both sides");

  array.write_row(victim_row, page.bits);
  array.write_row(victim_row - 1, aggressor_pattern);
  array.write_row(victim_row + 1, aggressor_pattern);
  hammer(array, victim_row - 1, victim_row + 1, hc);
  std::uint64_t accrued = array.accumulated_hc(victim_row);  // 2x hc, double-sided

  KeyRecord record;
  record.flip_bitmap = BitVector(array.cols());
  for (const auto& ev : array.resolve_victim(victim_row, rng)) record.flip_bitmap.set(ev.col, true);

  WeightPage encrypted{array.row_bits(victim_row), page.page_id};

  KeyWindow window = select_key_window(model_class_row(array, victim_row, accrued));
  record.key_material = extract_key(array, window, victim_row);
  record.shuffle_seed = fold_key(record.key_material.bits);
  record.hc_used = hc;
  record.page_id = page.page_id;
  return {encrypted, record};
}

inline WeightPage decode_page(const WeightPage& encrypted, const KeyRecord& record) {
  if (record.page_id != encrypted.page_id) throw ConfigError("decode_page: page id mismatch");
  if (record.flip_bitmap.size() != encrypted.bits.size())
    throw ConfigError("decode_page: bitmap length mismatch");
  return {encrypted.bits ^ record.flip_bitmap, encrypted.page_id};
}

// Keyed Fisher-Yates permutation over page slots, seeded from the fold of
// all per-page shuffle seeds.
inline std::vector<std::uint32_t> layout_permutation(const std::vector<KeyRecord>& records) {
  std::uint64_t seed = 0x73687566666c6521ull;
  for (const auto& r : records) seed = mix64(seed ^ r.shuffle_seed);
  std::vector<std::uint32_t> layout(records.size());
  std::iota(layout.begin(), layout.end(), 0);
  Rng rng(seed);
  for (std::size_t i = layout.size(); i > 1; --i)
    std::swap(layout[i - 1], layout[rng.next_below(i)]);
  return layout;
}

inline EncodedBundle shuffle_layout(const std::vector<WeightPage>& encrypted_pages,
                                    const std::vector<KeyRecord>& key_records) {
  if (encrypted_pages.empty()) throw ConfigError("shuffle_layout: no pages");
  if (encrypted_pages.size() != key_records.size())
    throw ConfigError("shuffle_layout: page/record count mismatch");
  EncodedBundle bundle;
  bundle.key_records = key_records;
  bundle.layout = layout_permutation(key_records);
  bundle.encrypted_pages.resize(encrypted_pages.size());
  for (std::size_t slot = 0; slot < bundle.layout.size(); ++slot)
    bundle.encrypted_pages[slot] = encrypted_pages[bundle.layout[slot]];
  return bundle;
}

// Inverse of shuffle_layout: encrypted pages back in original order.
inline std::vector<WeightPage> unshuffle(const EncodedBundle& bundle) {
  if (bundle.encrypted_pages.empty()) throw ConfigError("unshuffle: empty bundle");
  std::vector<WeightPage> pages(bundle.encrypted_pages.size());
  for (std::size_t slot = 0; slot < bundle.layout.size(); ++slot)
    pages[bundle.layout[slot]] = bundle.encrypted_pages[slot];
  return pages;
}

inline std::vector<WeightPage> decode_bundle(const EncodedBundle& bundle) {
  std::vector<WeightPage> pages = unshuffle(bundle);
  for (std::size_t i = 0; i < pages.size(); ++i) pages[i] = decode_page(pages[i], bundle.key_records[i]);
  return pages;
}

struct AttackerView {
  std::vector<std::size_t> slotwise_distance;  // original[i] vs bundle slot i
  std::vector<std::size_t> best_match_distance;  // layout-agnostic greedy matching
  double mean_slotwise = 0;
  double mean_best_match = 0;
};

// What an attacker with full DRAM visibility but no key sees: per-slot
// Hamming distance plus a greedy min-cost matching over all slots.
inline AttackerView attacker_view_distance(const std::vector<WeightPage>& originals,
                                           const EncodedBundle& bundle) {
  if (originals.size() != bundle.encrypted_pages.size())
    throw ConfigError("attacker_view_distance: page count mismatch");
  AttackerView view;
  std::size_t n = originals.size();
  for (std::size_t i = 0; i < n; ++i)
    view.slotwise_distance.push_back(originals[i].bits.hamming(bundle.encrypted_pages[i].bits));

  std::vector<bool> taken(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = std::numeric_limits<std::size_t>::max(), best_j = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      std::size_t d = originals[i].bits.hamming(bundle.encrypted_pages[j].bits);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    taken[best_j] = true;
    view.best_match_distance.push_back(best);
  }
  for (std::size_t i = 0; i < n; ++i) {
    view.mean_slotwise += static_cast<double>(view.slotwise_distance[i]) / n;
    view.mean_best_match += static_cast<double>(view.best_match_distance[i]) / n;
  }
  return view;
}

// --- binary file formats (little-endian throughout) ---

namespace detail {

inline void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

template <typename T>
inline void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}

  template <typename T>
  T get_le() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(get_u8()) << (8 * i);
    return v;
  }

  std::uint8_t get_u8() {
    if (pos_ >= data_.size()) throw IoError("truncated file");
    return data_[pos_++];
  }

  std::vector<std::uint8_t> get_bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("truncated file");
    std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void expect_magic(ByteReader& r, const char* magic) {
  auto got = r.get_bytes(4);
  if (std::memcmp(got.data(), magic, 4) != 0)
    throw IoError(std::string("bad magic, expected ") + magic);
}

}  // namespace detail

// Key file: magic "EIMK", version u8 = 1, page_id u32, hc u64, window offset
// u32, 32 key bytes, flip_bitmap length u32 (bits), bitmap bytes,
// shuffle_seed u64.
inline std::vector<std::uint8_t> serialize_key_record(const KeyRecord& record) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "EIMK", 4);
  out.push_back(1);
  detail::put_le<std::uint32_t>(out, record.page_id);
  detail::put_le<std::uint64_t>(out, record.hc_used);
  detail::put_le<std::uint32_t>(out, record.key_material.window.column_offset);
  auto key_bytes = record.key_material.bits.to_bytes();
  key_bytes.resize(32, 0);
  detail::put_bytes(out, key_bytes.data(), 32);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(record.flip_bitmap.size()));
  auto bitmap = record.flip_bitmap.to_bytes();
  detail::put_bytes(out, bitmap.data(), bitmap.size());
  detail::put_le<std::uint64_t>(out, record.shuffle_seed);
  return out;
}

inline KeyRecord deserialize_key_record(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  detail::expect_magic(r, "EIMK");
  if (r.get_u8() != 1) throw IoError("unsupported EIMK version");
  KeyRecord record;
  record.page_id = r.get_le<std::uint32_t>();
  record.hc_used = r.get_le<std::uint64_t>();
  std::uint32_t offset = r.get_le<std::uint32_t>();
  auto key_bytes = r.get_bytes(32);
  record.key_material.bits = BitVector::from_bytes(key_bytes, kKeyBits);
  record.key_material.window = {offset, kKeyBits, 0};
  std::uint32_t bitmap_bits = r.get_le<std::uint32_t>();
  record.flip_bitmap = BitVector::from_bytes(r.get_bytes((bitmap_bits + 7) / 8), bitmap_bits);
  record.shuffle_seed = r.get_le<std::uint64_t>();
  return record;
}

inline void write_key_record(const std::string& path, const KeyRecord& record) {
  detail::write_file(path, serialize_key_record(record));
}

inline KeyRecord read_key_record(const std::string& path) {
  return deserialize_key_record(detail::read_file(path));
}

// Bundle file: magic "EIMB", version u8 = 1, page count u32, page size u32
// (bits), layout permutation (u32 per slot), pages as raw bytes.
inline std::vector<std::uint8_t> serialize_bundle(const EncodedBundle& bundle) {
  std::vector<std::uint8_t> out;
  detail::put_bytes(out, "EIMB", 4);
  out.push_back(1);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(bundle.encrypted_pages.size()));
  std::uint32_t page_bits =
      bundle.encrypted_pages.empty() ? 0 : static_cast<std::uint32_t>(bundle.encrypted_pages[0].bits.size());
  detail::put_le<std::uint32_t>(out, page_bits);
  for (std::uint32_t slot : bundle.layout) detail::put_le<std::uint32_t>(out, slot);
  for (const auto& page : bundle.encrypted_pages) {
    auto bytes = page.bits.to_bytes();
    detail::put_bytes(out, bytes.data(), bytes.size());
  }
  return out;
}

inline EncodedBundle deserialize_bundle(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  detail::expect_magic(r, "EIMB");
  if (r.get_u8() != 1) throw IoError("unsupported EIMB version");
  std::uint32_t count = r.get_le<std::uint32_t>();
  std::uint32_t page_bits = r.get_le<std::uint32_t>();
  EncodedBundle bundle;
  for (std::uint32_t i = 0; i < count; ++i) bundle.layout.push_back(r.get_le<std::uint32_t>());
  for (std::uint32_t i = 0; i < count; ++i) {
    WeightPage page;
    page.bits = BitVector::from_bytes(r.get_bytes((page_bits + 7) / 8), page_bits);
    page.page_id = bundle.layout[i];
    bundle.encrypted_pages.push_back(std::move(page));
  }
  return bundle;
}

inline void write_bundle(const std::string& path, const EncodedBundle& bundle) {
  detail::write_file(path, serialize_bundle(bundle));
}

inline EncodedBundle read_bundle(const std::string& path) {
  return deserialize_bundle(detail::read_file(path));
}

}  // namespace eimtrng
