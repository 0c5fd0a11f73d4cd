#include "edtk/weight_archive.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "edtk/errors.hpp"

namespace edtk {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(n)));
}

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t n) : data_(data), n_(n) {}

  const std::uint8_t* take(std::size_t k, const char* what) {
    if (n_ - pos_ < k) throw ArchiveError(std::string("archive truncated while reading ") + what);
    const std::uint8_t* p = data_ + pos_;
    pos_ += k;
    return p;
  }
  std::uint8_t u8(const char* what) { return *take(1, what); }
  std::uint16_t u16(const char* what) {
    const auto* p = take(2, what);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    const auto* p = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == n_; }

 private:
  const std::uint8_t* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_archive(const std::vector<ArchiveEntry>& entries) {
  std::vector<std::uint8_t> out = {'E', 'D', 'T', 'K'};
  put_u16(out, kArchiveVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.path.size() > 0xffff) throw ArchiveError("path too long: " + e.path);
    put_u16(out, static_cast<std::uint16_t>(e.path.size()));
    out.insert(out.end(), e.path.begin(), e.path.end());
    put_u8(out, e.fused ? 1 : 0);
    const auto dims = e.tensor.shape().dims();
    put_u8(out, static_cast<std::uint8_t>(dims.size()));
    for (std::size_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

std::vector<ArchiveEntry> decode_archive(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 14) throw ArchiveError("archive too short");
  if (std::memcmp(bytes.data(), "EDTK", 4) != 0) throw ArchiveError("bad magic: not an EDTK weight archive");
  const std::size_t body = bytes.size() - 4;
  Reader crc_reader(bytes.data() + body, 4);
  const std::uint32_t stored = crc_reader.u32("checksum");
  const std::uint32_t actual = crc32_of(bytes.data(), body);
  if (stored != actual) throw ArchiveError("CRC-32 mismatch: archive is corrupted");

  Reader r(bytes.data() + 4, body - 4);
  const std::uint16_t version = r.u16("version");
  if (version != kArchiveVersion) throw ArchiveError("unsupported archive version " + std::to_string(version));
  const std::uint32_t count = r.u32("entry count");
  std::vector<ArchiveEntry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    ArchiveEntry e;
    const std::uint16_t len = r.u16("path length");
    const auto* p = r.take(len, "path");
    e.path.assign(reinterpret_cast<const char*>(p), len);
    const std::uint8_t flag = r.u8("mode flag");
    if (flag > 1) throw ArchiveError(e.path + ": invalid mode flag " + std::to_string(flag));
    e.fused = flag == 1;
    const std::uint8_t rank = r.u8("rank");
    if (rank < 1 || rank > Shape::kMaxRank) throw ArchiveError(e.path + ": invalid rank " + std::to_string(rank));
    std::vector<std::size_t> dims;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const std::uint32_t d = r.u32("dims");
      if (d == 0) throw ArchiveError(e.path + ": zero dimension");
      dims.push_back(d);
    }
    Tensor t{Shape(std::span<const std::size_t>(dims))};
    for (auto& v : t.data()) v = std::bit_cast<float>(r.u32("tensor data"));
    e.tensor = std::move(t);
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw ArchiveError("trailing bytes after the last entry");
  return entries;
}

std::vector<std::uint8_t> save_weights(const Network& net) {
  std::vector<ArchiveEntry> entries;
  for (const auto& p : net.parameters()) entries.push_back({p.path, p.fused, *p.tensor});
  return encode_archive(entries);
}

void load_weights(Network& net, const std::vector<std::uint8_t>& bytes) {
  const auto entries = decode_archive(bytes);
  const ParamList params = net.parameters();

  bool archive_fused = false;
  for (const auto& e : entries) archive_fused = archive_fused || e.fused;
  if (archive_fused != net.is_fused())
    throw ArchiveError(std::string("archive holds ") + (archive_fused ? "fused" : "training-form") +
                       " weights but the network is " + (net.is_fused() ? "fused" : "in training form"));

  std::map<std::string, const ArchiveEntry*> by_path;
  for (const auto& e : entries)
    if (!by_path.emplace(e.path, &e).second) throw ArchiveError("duplicate path in archive: " + e.path);
  for (const auto& p : params) {
    auto it = by_path.find(p.path);
    if (it == by_path.end()) throw ArchiveError("archive is missing path " + p.path);
    if (it->second->fused != p.fused) throw ArchiveError(p.path + ": mode flag does not match the network");
    if (!(it->second->tensor.shape() == p.tensor->shape()))
      throw ArchiveError(p.path + ": archive shape " + it->second->tensor.shape().to_string() + ", network expects " +
                         p.tensor->shape().to_string());
  }
  if (entries.size() != params.size()) {
    std::map<std::string, bool> known;
    for (const auto& p : params) known[p.path] = true;
    for (const auto& e : entries)
      if (!known.count(e.path)) throw ArchiveError("archive path not in network: " + e.path);
  }
  for (const auto& p : params) parameter_at(net, p.path) = by_path.at(p.path)->tensor;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArchiveError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError("write failed for '" + path + "'");
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace edtk
