#pragma once

/**
 * @file dataset_file.hpp
 * @brief Binary dataset container.
 *
 * Little-endian layout:
 *
 *   header   magic "TVAEDATA", u32 version, u64 slot-table hash, u8 property
 *            kind, u8 labeled flag, u16 zero, f64 rho, f64 E_s, f64 nu_s,
 *            u64 datagen config hash, u64 record count
 *   record   44-byte adjacency bitmask (351 upper-triangle bits, pair order),
 *            27 f64 offsets, [P f64 labels if labeled], u32 seed_a,
 *            u32 seed_b, u64 stream, u64 FNV-1a checksum of the record bytes
 */

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "trussvae/beam_element.hpp"
#include "trussvae/datagen.hpp"
#include "trussvae/io/text.hpp"
#include "trussvae/slots.hpp"

namespace trussvae::io {

static_assert(std::endian::native == std::endian::little, "dataset files assume a little-endian host");

inline constexpr char kDatasetMagic[8] = {'T', 'V', 'A', 'E', 'D', 'A', 'T', 'A'};
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr int kMaskBytes = (kNumPairs + 7) / 8;

struct DatasetHeader {
  std::uint32_t version = kDatasetVersion;
  std::uint64_t slot_hash = slot_table_hash();
  PropertyKind kind = PropertyKind::stiffness9;
  bool labeled = false;
  double rho = 0.15;
  MaterialParams material;
  std::uint64_t datagen_hash = 0;
  std::uint64_t count = 0;

  bool operator==(const DatasetHeader& o) const {
    return version == o.version && slot_hash == o.slot_hash && kind == o.kind && labeled == o.labeled &&
           std::bit_cast<std::uint64_t>(rho) == std::bit_cast<std::uint64_t>(o.rho) &&
           material.youngs == o.material.youngs && material.poisson == o.material.poisson &&
           datagen_hash == o.datagen_hash && count == o.count;
  }
};

struct DatasetFile {
  DatasetHeader header;
  std::vector<DatasetRecord> records;
};

namespace detail {

inline std::uint64_t fnv1a(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class ByteWriter {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<unsigned char> bytes;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, p_ + at_, sizeof(T));
    at_ += sizeof(T);
    return v;
  }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t at_ = 0;
};

inline std::size_t record_size(const DatasetHeader& h) {
  return kMaskBytes + 8 * kNumOffsets + (h.labeled ? 8 * property_length(h.kind) : 0) + 4 + 4 + 8 + 8;
}

inline std::vector<unsigned char> encode_record(const DatasetRecord& r, const DatasetHeader& h) {
  ByteWriter w;
  std::array<unsigned char, kMaskBytes> mask{};
  for (int i = 0; i < kNumSlots; ++i)
    for (int j = i + 1; j < kNumSlots; ++j)
      if (r.graph.has_beam(i, j)) {
        const int k = pair_index(i, j);
        mask[std::size_t(k / 8)] |= static_cast<unsigned char>(1u << (k % 8));
      }
  for (unsigned char b : mask) w.put(b);
  for (double v : r.graph.offsets()) w.put(v);
  if (h.labeled) {
    if (r.properties.kind != h.kind || int(r.properties.values.size()) != property_length(h.kind))
      throw FormatError("record labels do not match the dataset's property kind");
    for (double v : r.properties.values) w.put(v);
  }
  w.put(r.provenance.seed_a);
  w.put(r.provenance.seed_b);
  w.put(r.provenance.stream);
  w.put(fnv1a(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

}  // namespace detail

inline void write_dataset(const std::string& path, DatasetHeader header, const std::vector<DatasetRecord>& records) {
  header.count = records.size();
  header.slot_hash = slot_table_hash();
  header.version = kDatasetVersion;
  std::ofstream f = open_out(path, true);
  detail::ByteWriter w;
  for (char c : kDatasetMagic) w.put(c);
  w.put(header.version);
  w.put(header.slot_hash);
  w.put(static_cast<std::uint8_t>(header.kind));
  w.put(static_cast<std::uint8_t>(header.labeled));
  w.put(std::uint16_t{0});
  w.put(header.rho);
  w.put(header.material.youngs);
  w.put(header.material.poisson);
  w.put(header.datagen_hash);
  w.put(header.count);
  f.write(reinterpret_cast<const char*>(w.bytes.data()), std::streamsize(w.bytes.size()));
  for (const DatasetRecord& r : records) {
    const auto bytes = detail::encode_record(r, header);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  }
  if (!f) throw Error("write to '" + path + "' failed");
}

/// Record-at-a-time reader; every record is checked independently.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& path) : f_(open_in(path, true)) {
    constexpr std::size_t kHeaderBytes = 8 + 4 + 8 + 1 + 1 + 2 + 8 * 3 + 8 + 8;
    std::array<unsigned char, kHeaderBytes> buf{};
    if (!f_.read(reinterpret_cast<char*>(buf.data()), kHeaderBytes)) throw FormatError("truncated dataset header");
    if (std::memcmp(buf.data(), kDatasetMagic, 8) != 0) throw FormatError("not a dataset file (bad magic)");
    detail::ByteReader r(buf.data() + 8, kHeaderBytes - 8);
    header_.version = r.get<std::uint32_t>();
    if (header_.version != kDatasetVersion)
      throw FormatError("unsupported dataset version " + std::to_string(header_.version));
    header_.slot_hash = r.get<std::uint64_t>();
    if (header_.slot_hash != slot_table_hash()) throw FormatError("dataset slot-table hash does not match this build");
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw FormatError("unknown property kind in dataset header");
    header_.kind = static_cast<PropertyKind>(kind);
    header_.labeled = r.get<std::uint8_t>() != 0;
    r.get<std::uint16_t>();
    header_.rho = r.get<double>();
    header_.material.youngs = r.get<double>();
    header_.material.poisson = r.get<double>();
    header_.datagen_hash = r.get<std::uint64_t>();
    header_.count = r.get<std::uint64_t>();
    buf_.resize(detail::record_size(header_));
  }

  const DatasetHeader& header() const { return header_; }

  /// Next record, or nullopt after the last one.
  std::optional<DatasetRecord> next() {
    if (index_ >= header_.count) return std::nullopt;
    const std::uint64_t i = index_++;
    if (!f_.read(reinterpret_cast<char*>(buf_.data()), std::streamsize(buf_.size())))
      throw FormatError("corrupt record " + std::to_string(i) + ": truncated");
    const std::size_t body = buf_.size() - 8;
    std::uint64_t stored;
    std::memcpy(&stored, buf_.data() + body, 8);
    if (stored != detail::fnv1a(buf_.data(), body))
      throw FormatError("corrupt record " + std::to_string(i) + ": checksum mismatch");

    DatasetRecord rec;
    for (int i2 = 0; i2 < kNumSlots; ++i2)
      for (int j = i2 + 1; j < kNumSlots; ++j) {
        const int k = pair_index(i2, j);
        if ((buf_[std::size_t(k / 8)] >> (k % 8)) & 1u) rec.graph.add_beam(i2, j);
      }
    detail::ByteReader r(buf_.data() + kMaskBytes, body - kMaskBytes);
    for (double& v : rec.graph.offsets()) v = r.get<double>();
    rec.properties.kind = header_.kind;
    if (header_.labeled) {
      rec.properties.values.resize(std::size_t(property_length(header_.kind)));
      for (double& v : rec.properties.values) v = r.get<double>();
    }
    rec.provenance.seed_a = r.get<std::uint32_t>();
    rec.provenance.seed_b = r.get<std::uint32_t>();
    rec.provenance.stream = r.get<std::uint64_t>();
    return rec;
  }

 private:
  std::ifstream f_;
  DatasetHeader header_;
  std::vector<unsigned char> buf_;
  std::uint64_t index_ = 0;
};

inline DatasetFile read_dataset(const std::string& path) {
  DatasetReader reader(path);
  DatasetFile out;
  out.header = reader.header();
  out.records.reserve(std::size_t(out.header.count));
  while (auto rec = reader.next()) out.records.push_back(std::move(*rec));
  return out;
}

}  // namespace trussvae::io
