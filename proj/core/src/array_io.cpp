#include "perfmc/array_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace perfmc {

namespace {

using json = nlohmann::json;

constexpr const char* kOrder = "row-major-frame-contiguous";
constexpr const char* kByteOrder = "little-endian";

Path with_ext(const Path& base, const char* ext, const std::string& suffix) {
  return Path(base.string() + ext + suffix);
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

Shape series_shape(const ArrayHeader& h, const Path& base) {
  if (h.shape.size() != 3)
    throw FormatError(base.string() + ".json: header field 'shape' must have 3 entries [n1, n2, t] for a series");
  return Shape{h.shape[0], h.shape[1], h.shape[2]};
}

std::vector<Path> write_files(const Path& base, DType dtype, const std::vector<std::int64_t>& shape,
                              const void* bytes, std::size_t nbytes, const std::string& suffix) {
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  const json header = {{"dtype", to_string(dtype)}, {"shape", shape}, {"order", kOrder}, {"byte_order", kByteOrder}};
  const Path jpath = with_ext(base, ".json", suffix);
  const Path rpath = with_ext(base, ".raw", suffix);
  {
    std::ofstream out(jpath, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + jpath.string() + " for writing");
    out << header.dump(2) << '\n';
    if (!out) throw FormatError("failed writing " + jpath.string());
  }
  {
    std::ofstream out(rpath, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + rpath.string() + " for writing");
    out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(nbytes));
    if (!out) throw FormatError("failed writing " + rpath.string());
  }
  return {jpath, rpath};
}

std::vector<char> read_payload(const Path& base, const ArrayHeader& h) {
  const Path rpath = with_ext(base, ".raw", "");
  std::ifstream in(rpath, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + rpath.string());
  const auto expected = static_cast<std::streamoff>(h.count()) * static_cast<std::streamoff>(element_bytes(h.dtype));
  const std::streamoff actual = in.tellg();
  if (actual != expected)
    throw FormatError(rpath.string() + ": payload has " + std::to_string(actual) + " bytes, header field 'shape' implies " +
                      std::to_string(expected));
  std::vector<char> bytes(static_cast<std::size_t>(expected));
  in.seekg(0);
  in.read(bytes.data(), expected);
  if (!in) throw FormatError("failed reading " + rpath.string());
  return bytes;
}

float load_float(const char* p) {
  float v;
  std::memcpy(&v, p, sizeof v);
  return to_little(v);
}

}  // namespace

std::string to_string(DType d) {
  switch (d) {
    case DType::complex64: return "complex64";
    case DType::float32: return "float32";
    case DType::uint8: return "uint8";
  }
  return "?";
}

std::size_t element_bytes(DType d) {
  switch (d) {
    case DType::complex64: return 8;
    case DType::float32: return 4;
    case DType::uint8: return 1;
  }
  return 0;
}

std::int64_t ArrayHeader::count() const {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Path array_base(const Path& p) {
  const auto ext = p.extension();
  if (ext == ".json" || ext == ".raw") return Path(p).replace_extension();
  return p;
}

ArrayHeader read_header(const Path& base_in) {
  const Path base = array_base(base_in);
  const Path jpath = with_ext(base, ".json", "");
  std::ifstream in(jpath);
  if (!in) throw FormatError("cannot open " + jpath.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(jpath.string() + ": not valid JSON (" + e.what() + ")");
  }
  const auto field = [&](const char* name) -> const json& {
    if (!j.is_object() || !j.contains(name)) throw FormatError(jpath.string() + ": header field '" + name + "' missing");
    return j.at(name);
  };

  ArrayHeader h;
  const json& dtype = field("dtype");
  if (!dtype.is_string()) throw FormatError(jpath.string() + ": header field 'dtype' must be a string");
  const auto d = dtype.get<std::string>();
  if (d == "complex64") h.dtype = DType::complex64;
  else if (d == "float32") h.dtype = DType::float32;
  else if (d == "uint8") h.dtype = DType::uint8;
  else throw FormatError(jpath.string() + ": header field 'dtype' has unsupported value '" + d + "'");

  const json& shape = field("shape");
  if (!shape.is_array() || shape.empty()) throw FormatError(jpath.string() + ": header field 'shape' must be a non-empty array");
  for (const auto& e : shape) {
    if (!e.is_number_integer() || e.get<std::int64_t>() <= 0)
      throw FormatError(jpath.string() + ": header field 'shape' must contain positive integers");
    h.shape.push_back(e.get<std::int64_t>());
  }

  const json& order = field("order");
  if (!order.is_string() || order.get<std::string>() != kOrder)
    throw FormatError(jpath.string() + ": header field 'order' must be \"" + kOrder + "\"");
  const json& bo = field("byte_order");
  if (!bo.is_string() || bo.get<std::string>() != kByteOrder)
    throw FormatError(jpath.string() + ": header field 'byte_order' must be \"" + kByteOrder + "\"");
  for (const auto& [key, value] : j.items()) {
    if (key != "dtype" && key != "shape" && key != "order" && key != "byte_order")
      throw FormatError(jpath.string() + ": unknown header field '" + key + "'");
  }
  return h;
}

std::vector<Path> write_array(const Path& base, const ComplexSeries& s, const std::string& suffix) {
  std::vector<float> buf;
  buf.reserve(static_cast<std::size_t>(2 * s.size()));
  for (const auto& v : s.data()) {
    buf.push_back(to_little(static_cast<float>(v.real())));
    buf.push_back(to_little(static_cast<float>(v.imag())));
  }
  return write_files(array_base(base), DType::complex64, {s.n1(), s.n2(), s.frames()}, buf.data(),
                     buf.size() * sizeof(float), suffix);
}

std::vector<Path> write_array(const Path& base, const RealSeries& s, const std::string& suffix) {
  std::vector<float> buf;
  buf.reserve(static_cast<std::size_t>(s.size()));
  for (double v : s.data()) buf.push_back(to_little(static_cast<float>(v)));
  return write_files(array_base(base), DType::float32, {s.n1(), s.n2(), s.frames()}, buf.data(),
                     buf.size() * sizeof(float), suffix);
}

std::vector<Path> write_array(const Path& base, const SamplingMask& m, const std::string& suffix) {
  const auto data = m.keep.data();
  std::vector<std::uint8_t> buf(data.begin(), data.end());
  for (auto& b : buf) b = b != 0;
  return write_files(array_base(base), DType::uint8, {m.keep.n1(), m.keep.n2(), m.keep.frames()}, buf.data(), buf.size(),
                     suffix);
}

std::vector<Path> write_float32(const Path& base, const std::vector<std::int64_t>& shape, std::span<const float> values,
                                const std::string& suffix) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  if (n != static_cast<std::int64_t>(values.size())) throw DimensionError("write_float32: shape does not match value count");
  std::vector<float> buf(values.begin(), values.end());
  for (auto& v : buf) v = to_little(v);
  return write_files(array_base(base), DType::float32, shape, buf.data(), buf.size() * sizeof(float), suffix);
}

ComplexSeries read_complex_series(const Path& base_in) {
  const Path base = array_base(base_in);
  const ArrayHeader h = read_header(base);
  if (h.dtype == DType::uint8) throw FormatError(base.string() + ".json: header field 'dtype' must be complex64 or float32");
  const Shape shape = series_shape(h, base);
  const auto bytes = read_payload(base, h);
  ComplexSeries s(shape);
  auto out = s.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (h.dtype == DType::complex64)
      out[i] = cplx(load_float(bytes.data() + 8 * i), load_float(bytes.data() + 8 * i + 4));
    else
      out[i] = cplx(load_float(bytes.data() + 4 * i), 0.0);
  }
  return s;
}

RealSeries read_real_series(const Path& base_in) {
  const Path base = array_base(base_in);
  const ArrayHeader h = read_header(base);
  if (h.dtype != DType::float32) throw FormatError(base.string() + ".json: header field 'dtype' must be float32");
  const Shape shape = series_shape(h, base);
  const auto bytes = read_payload(base, h);
  RealSeries s(shape);
  auto out = s.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_float(bytes.data() + 4 * i);
  return s;
}

SamplingMask read_mask(const Path& base_in) {
  const Path base = array_base(base_in);
  const ArrayHeader h = read_header(base);
  if (h.dtype != DType::uint8) throw FormatError(base.string() + ".json: header field 'dtype' must be uint8");
  const Shape shape = series_shape(h, base);
  const auto bytes = read_payload(base, h);
  SamplingMask m{Series<std::uint8_t>(shape), 1.0};
  auto out = m.keep.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto b = static_cast<std::uint8_t>(bytes[i]);
    if (b > 1) throw FormatError(base.string() + ".raw: mask values must be 0 or 1");
    out[i] = b;
  }
  m.rate = m.achieved_rate();
  return m;
}

std::vector<float> read_float32(const Path& base_in, ArrayHeader* header) {
  const Path base = array_base(base_in);
  const ArrayHeader h = read_header(base);
  if (h.dtype != DType::float32) throw FormatError(base.string() + ".json: header field 'dtype' must be float32");
  const auto bytes = read_payload(base, h);
  std::vector<float> out(static_cast<std::size_t>(h.count()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_float(bytes.data() + 4 * i);
  if (header != nullptr) *header = h;
  return out;
}

}  // namespace perfmc
