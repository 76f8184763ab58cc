#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cascade/simulation.hpp"

namespace cascade {

// Binary layout (little endian): 16-byte header "CTTS", u32 version, u64
// record count; then records of u8 channel + u64 timestamp_ps. Version 2
// appends a u8 origin tag to each record.
inline constexpr std::uint32_t kStreamVersionPlain = 1;
inline constexpr std::uint32_t kStreamVersionTruth = 2;

enum class StreamFormat { kBinary, kCsv };

StreamFormat format_for_path(const std::filesystem::path& path);

void write_stream(std::ostream& os, const TimestampStream& stream, StreamFormat format,
                  bool with_truth = false);
TimestampStream read_stream(std::istream& is, StreamFormat format,
                            std::vector<std::string>* warnings = nullptr);

void export_stream(const TimestampStream& stream, const std::filesystem::path& path,
                   bool with_truth = false);
TimestampStream import_stream(const std::filesystem::path& path,
                              std::vector<std::string>* warnings = nullptr);

}  // namespace cascade
