#include "cascade/stream_io.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "cascade/errors.hpp"

namespace cascade {

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'T', 'T', 'S'};

template <typename T>
void put_le(std::ostream& os, T value) {
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  os.write(buf.data(), buf.size());
}

template <typename T>
bool get_le(std::istream& is, T* value) {
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) return false;
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  *value = v;
  return true;
}

Origin origin_from_byte(unsigned v, std::size_t record) {
  if (v > static_cast<unsigned>(Origin::kUnknown)) {
    throw ValidationError("invalid origin tag at record " + std::to_string(record));
  }
  return static_cast<Origin>(v);
}

// Stable-sorts by timestamp when any channel runs backwards.
void normalize_order(TimestampStream& s, std::vector<std::string>* warnings) {
  std::map<std::uint8_t, std::uint64_t> last;
  bool decreasing = false;
  for (const auto& e : s.events) {
    auto [it, fresh] = last.try_emplace(e.channel, e.timestamp);
    if (!fresh) {
      if (e.timestamp < it->second) decreasing = true;
      it->second = e.timestamp;
    }
  }
  if (decreasing) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const PhotonEvent& a, const PhotonEvent& b) { return a.timestamp < b.timestamp; });
    if (warnings) warnings->push_back("timestamps were not nondecreasing per channel; events re-sorted");
  }
  std::uint64_t max_ts = 0;
  for (const auto& e : s.events) max_ts = std::max(max_ts, e.timestamp);
  s.duration = s.events.empty() ? 0 : max_ts + 1;
}

TimestampStream read_binary(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw ValidationError("not a CTTS timestamp file (bad magic)");
  }
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  if (!get_le(is, &version) || !get_le(is, &count)) throw ValidationError("truncated CTTS header");
  if (version != kStreamVersionPlain && version != kStreamVersionTruth) {
    throw ValidationError("unsupported CTTS version " + std::to_string(version));
  }
  TimestampStream s;
  s.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint8_t channel = 0;
    std::uint64_t ts = 0;
    if (!get_le(is, &channel) || !get_le(is, &ts)) {
      throw ValidationError("truncated CTTS file at record " + std::to_string(i));
    }
    Origin origin = Origin::kUnknown;
    if (version == kStreamVersionTruth) {
      std::uint8_t tag = 0;
      if (!get_le(is, &tag)) throw ValidationError("truncated CTTS file at record " + std::to_string(i));
      origin = origin_from_byte(tag, i);
    }
    s.events.push_back({channel, ts, origin, -1});
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("CTTS file has trailing bytes after " + std::to_string(count) + " records");
  }
  return s;
}

TimestampStream read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("timestamp CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool truth = false;
  if (line == "channel,timestamp_ps,origin") {
    truth = true;
  } else if (line != "channel,timestamp_ps") {
    throw ValidationError("timestamp CSV must start with header 'channel,timestamp_ps'");
  }
  TimestampStream s;
  std::size_t record = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    unsigned channel = 0;
    unsigned long long ts = 0;
    unsigned origin = static_cast<unsigned>(Origin::kUnknown);
    char c1 = 0, c2 = 0;
    bool ok = static_cast<bool>(ls >> channel >> c1 >> ts) && c1 == ',' && channel <= 255;
    if (ok && truth) ok = static_cast<bool>(ls >> c2 >> origin) && c2 == ',';
    if (ok) {
      std::string rest;
      ls >> rest;
      ok = rest.empty();
    }
    if (!ok) throw ValidationError("malformed timestamp CSV at record " + std::to_string(record));
    s.events.push_back({static_cast<std::uint8_t>(channel), ts,
                        truth ? origin_from_byte(origin, record) : Origin::kUnknown, -1});
    ++record;
  }
  return s;
}

}  // namespace

StreamFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? StreamFormat::kCsv : StreamFormat::kBinary;
}

void write_stream(std::ostream& os, const TimestampStream& stream, StreamFormat format, bool with_truth) {
  if (format == StreamFormat::kCsv) {
    os << (with_truth ? "channel,timestamp_ps,origin\n" : "channel,timestamp_ps\n");
    for (const auto& e : stream.events) {
      os << static_cast<unsigned>(e.channel) << ',' << e.timestamp;
      if (with_truth) os << ',' << static_cast<unsigned>(e.origin);
      os << '\n';
    }
    return;
  }
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, with_truth ? kStreamVersionTruth : kStreamVersionPlain);
  put_le<std::uint64_t>(os, stream.events.size());
  for (const auto& e : stream.events) {
    put_le<std::uint8_t>(os, e.channel);
    put_le<std::uint64_t>(os, e.timestamp);
    if (with_truth) put_le<std::uint8_t>(os, static_cast<std::uint8_t>(e.origin));
  }
}

TimestampStream read_stream(std::istream& is, StreamFormat format, std::vector<std::string>* warnings) {
  TimestampStream s = format == StreamFormat::kCsv ? read_csv(is) : read_binary(is);
  normalize_order(s, warnings);
  return s;
}

void export_stream(const TimestampStream& stream, const std::filesystem::path& path, bool with_truth) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValidationError("cannot open '" + path.string() + "' for writing");
  write_stream(os, stream, format_for_path(path), with_truth);
  if (!os) throw ValidationError("failed writing '" + path.string() + "'");
}

TimestampStream import_stream(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return read_stream(is, format_for_path(path), warnings);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace cascade
