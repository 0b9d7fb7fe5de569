#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "perfmc/array.hpp"

namespace perfmc {

/// On-disk array format: `<base>.json` header plus `<base>.raw` payload.
///
///   {"byte_order": "little-endian", "dtype": "complex64", "order": "row-major-frame-contiguous",
///    "shape": [n1, n2, t]}
///
/// complex64 is interleaved (re, im) float32. Payload values follow the
/// in-memory Series layout (frame-contiguous, row-major within a frame).
enum class DType { complex64, float32, uint8 };

std::string to_string(DType d);
std::size_t element_bytes(DType d);

struct ArrayHeader {
  DType dtype = DType::float32;
  std::vector<std::int64_t> shape;

  std::int64_t count() const;
};

using Path = std::filesystem::path;

/// Strips a trailing `.json` / `.raw` so either file name or base can be passed.
Path array_base(const Path& p);

/// Parses and validates the header. Errors name the offending field.
ArrayHeader read_header(const Path& base);

/// Every writer returns the files it created. `suffix` is appended to both
/// file names (used for `.partial` staging).
std::vector<Path> write_array(const Path& base, const ComplexSeries& s, const std::string& suffix = "");
std::vector<Path> write_array(const Path& base, const RealSeries& s, const std::string& suffix = "");
std::vector<Path> write_array(const Path& base, const SamplingMask& m, const std::string& suffix = "");
std::vector<Path> write_float32(const Path& base, const std::vector<std::int64_t>& shape, std::span<const float> values,
                                const std::string& suffix = "");

/// complex64 or float32 payloads; float32 is promoted to complex.
ComplexSeries read_complex_series(const Path& base);
/// float32 payloads only.
RealSeries read_real_series(const Path& base);
/// uint8 payload; `rate` is set to the achieved rate.
SamplingMask read_mask(const Path& base);
std::vector<float> read_float32(const Path& base, ArrayHeader* header = nullptr);

}  // namespace perfmc
