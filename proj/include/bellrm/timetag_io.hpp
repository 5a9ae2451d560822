#pragma once

// BTAG time-tag files.
//
//   header (32 bytes): "BTAG" | u32 version | u64 record count | 16 reserved
//   record (16 bytes): u64 timestamp_ns | u32 pulse_index | u8 station |
//                      u8 port_bit | u16 setting_index
//
// All integers little-endian. Writers emit records in global time order.
// The CSV mirror carries the same fields in the same order, one record per
// line after a header row.

#include <bellrm/errors.hpp>
#include <bellrm/events.hpp>

#include <array>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bellrm::btag {

inline constexpr std::array<char, 4> kMagic = {'B', 'T', 'A', 'G'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 32;
inline constexpr std::size_t kRecordSize = 16;
inline constexpr std::string_view kCsvHeader = "timestamp_ns,pulse_index,station,port_bit,setting_index";

namespace detail {
template <class T>
void put_le(unsigned char* out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}
template <class T>
T get_le(const unsigned char* in) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[i]) << (8 * i));
  return v;
}
}  // namespace detail

inline std::array<unsigned char, kHeaderSize> encode_header(std::uint64_t count) {
  std::array<unsigned char, kHeaderSize> h{};
  std::memcpy(h.data(), kMagic.data(), 4);
  detail::put_le<std::uint32_t>(h.data() + 4, kVersion);
  detail::put_le<std::uint64_t>(h.data() + 8, count);
  return h;
}

inline std::array<unsigned char, kRecordSize> encode_record(const DetectionEvent& e) {
  std::array<unsigned char, kRecordSize> r{};
  detail::put_le<std::uint64_t>(r.data(), e.timestamp_ns);
  detail::put_le<std::uint32_t>(r.data() + 8, e.pulse_index);
  r[12] = static_cast<unsigned char>(e.station);
  r[13] = e.port_bit;
  detail::put_le<std::uint16_t>(r.data() + 14, e.setting_index);
  return r;
}

// Decodes one record; `offset` is the record's position in the file, used
// for error reporting.
inline DetectionEvent decode_record(const unsigned char* r, std::uint64_t offset) {
  DetectionEvent e;
  e.timestamp_ns = detail::get_le<std::uint64_t>(r);
  e.pulse_index = detail::get_le<std::uint32_t>(r + 8);
  if (r[12] > 1) throw IntegrityError("invalid station byte " + std::to_string(r[12]), offset + 12);
  e.station = static_cast<Station>(r[12]);
  if (r[13] > 1) throw IntegrityError("invalid port bit " + std::to_string(r[13]), offset + 13);
  e.port_bit = r[13];
  e.setting_index = detail::get_le<std::uint16_t>(r + 14);
  return e;
}

// Streaming writer; the record count is patched into the header on close.
class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot open " + path + " for writing");
    const auto h = encode_header(0);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
  }
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;
  ~Writer() {
    if (out_.is_open()) {
      try {
        close();
      } catch (...) {
      }
    }
  }

  void write(const DetectionEvent& e) {
    const auto r = encode_record(e);
    buffer_.insert(buffer_.end(), r.begin(), r.end());
    ++count_;
    if (buffer_.size() >= (1u << 20)) flush_buffer();
  }

  void close() {
    flush_buffer();
    const auto h = encode_header(count_);
    out_.seekp(0);
    out_.write(reinterpret_cast<const char*>(h.data()), h.size());
    out_.close();
    if (out_.fail()) throw DataError("write to " + path_ + " failed");
  }

  std::uint64_t count() const noexcept { return count_; }

 private:
  void flush_buffer() {
    out_.write(reinterpret_cast<const char*>(buffer_.data()),
               static_cast<std::streamsize>(buffer_.size()));
    buffer_.clear();
  }

  std::string path_;
  std::ofstream out_;
  std::vector<unsigned char> buffer_;
  std::uint64_t count_ = 0;
};

inline std::string encode(std::span<const DetectionEvent> events) {
  std::string out(kHeaderSize + kRecordSize * events.size(), '\0');
  auto* p = reinterpret_cast<unsigned char*>(out.data());
  const auto h = encode_header(events.size());
  std::memcpy(p, h.data(), h.size());
  p += kHeaderSize;
  for (const auto& e : events) {
    const auto r = encode_record(e);
    std::memcpy(p, r.data(), r.size());
    p += kRecordSize;
  }
  return out;
}

inline std::vector<DetectionEvent> decode(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderSize) {
    throw IntegrityError("truncated header: " + std::to_string(bytes.size()) + " of 32 bytes",
                         bytes.size());
  }
  if (std::memcmp(p, kMagic.data(), 4) != 0) throw IntegrityError("bad magic, expected BTAG", 0);
  const auto version = detail::get_le<std::uint32_t>(p + 4);
  if (version != kVersion) throw IntegrityError("unsupported version " + std::to_string(version), 4);
  const auto count = detail::get_le<std::uint64_t>(p + 8);
  const std::uint64_t body = bytes.size() - kHeaderSize;
  if (body / kRecordSize < count) {
    const std::uint64_t complete = body / kRecordSize;
    throw IntegrityError("truncated: header declares " + std::to_string(count) + " records, file holds " +
                             std::to_string(complete),
                         kHeaderSize + complete * kRecordSize);
  }
  if (body != count * kRecordSize) {
    throw IntegrityError("trailing bytes after " + std::to_string(count) + " records",
                         kHeaderSize + count * kRecordSize);
  }
  std::vector<DetectionEvent> events;
  events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t off = kHeaderSize + i * kRecordSize;
    events.push_back(decode_record(p + off, off));
  }
  return events;
}

inline void write_file(const std::string& path, std::span<const DetectionEvent> events) {
  Writer w(path);
  for (const auto& e : events) w.write(e);
  w.close();
}

inline std::vector<DetectionEvent> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

inline void write_csv(std::ostream& out, std::span<const DetectionEvent> events) {
  out << kCsvHeader << '\n';
  for (const auto& e : events) {
    out << e.timestamp_ns << ',' << e.pulse_index << ',' << static_cast<int>(e.station) << ','
        << static_cast<int>(e.port_bit) << ',' << e.setting_index << '\n';
  }
}

inline std::vector<DetectionEvent> read_csv(std::istream& in) {
  std::vector<DetectionEvent> events;
  std::string line;
  std::size_t line_no = 0;
  const auto parse = [&](std::string_view field, auto& value, const char* name) {
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw DataError("csv line " + std::to_string(line_no) + ": bad " + name + " '" +
                      std::string(field) + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == kCsvHeader) continue;
    std::array<std::string_view, 5> f;
    std::string_view rest = line;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (k == 4)) {
        throw DataError("csv line " + std::to_string(line_no) + ": expected 5 fields");
      }
      f[k] = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    DetectionEvent e;
    parse(f[0], e.timestamp_ns, "timestamp_ns");
    parse(f[1], e.pulse_index, "pulse_index");
    if (f[2] == "A" || f[2] == "0") {
      e.station = Station::A;
    } else if (f[2] == "B" || f[2] == "1") {
      e.station = Station::B;
    } else {
      throw DataError("csv line " + std::to_string(line_no) + ": bad station '" + std::string(f[2]) + "'");
    }
    unsigned bit = 0;
    parse(f[3], bit, "port_bit");
    if (bit > 1) throw DataError("csv line " + std::to_string(line_no) + ": port_bit must be 0 or 1");
    e.port_bit = static_cast<std::uint8_t>(bit);
    parse(f[4], e.setting_index, "setting_index");
    events.push_back(e);
  }
  return events;
}

// Per-station streams of a merged, time-ordered event list.
inline std::array<std::vector<DetectionEvent>, 2> split_stations(std::span<const DetectionEvent> events) {
  std::array<std::vector<DetectionEvent>, 2> out;
  for (const auto& e : events) out[static_cast<int>(e.station)].push_back(e);
  return out;
}

}  // namespace bellrm::btag
