#pragma once

// Array container used by scene, motion, checkpoint and hand-model files.
//
// Layout (all integers little-endian):
//   [0, 8)    magic "HOISYNC\0"
//   [8, 12)   u32 container version (= 1)
//   [12, 16)  u32 reserved, zero
//   [16, 24)  u64 header byte length L
//   [24, 24+L) UTF-8 JSON header
//   zero padding up to the next multiple of 8
//   data blob; each array starts at header.arrays[i].offset (relative to the
//   blob start, 8-byte aligned) and is stored row-major.
//
// Header: {"kind": str, "version": int, "meta": {...},
//          "arrays": [{"name", "dtype": "<f4"|"<f8"|"<i4", "shape": [...],
//                      "offset", "nbytes"}]}

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoisynth/core/error.hpp"
#include "hoisynth/core/types.hpp"

namespace hoisynth {

inline constexpr char kContainerMagic[8] = {'H', 'O', 'I', 'S', 'Y', 'N', 'C', '\0'};
inline constexpr std::uint32_t kContainerVersion = 1;

enum class DType { kF32, kF64, kI32 };

inline const char* dtype_name(DType d) {
  switch (d) {
    case DType::kF32: return "<f4";
    case DType::kF64: return "<f8";
    case DType::kI32: return "<i4";
  }
  return "?";
}

inline std::size_t dtype_size(DType d) { return d == DType::kF64 ? 8 : 4; }

inline DType parse_dtype(const std::string& s) {
  if (s == "<f4") return DType::kF32;
  if (s == "<f8") return DType::kF64;
  if (s == "<i4") return DType::kI32;
  throw FormatError("unsupported dtype '" + s + "'");
}

namespace detail {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

}  // namespace detail

/// In-memory container; arrays keep their encoded bytes.
class Container {
 public:
  struct Array {
    DType dtype = DType::kF64;
    std::vector<std::int64_t> shape;
    std::vector<unsigned char> bytes;

    std::int64_t count() const {
      std::int64_t n = 1;
      for (auto s : shape) n *= s;
      return n;
    }
  };

  std::string kind;
  int version = 1;
  nlohmann::json meta = nlohmann::json::object();

  bool has(const std::string& name) const { return arrays_.count(name) > 0; }
  const std::map<std::string, Array>& arrays() const { return arrays_; }

  void put(const std::string& name, DType dtype, std::vector<std::int64_t> shape, const double* data) {
    Array a{dtype, std::move(shape), {}};
    const auto n = static_cast<std::size_t>(a.count());
    a.bytes.resize(n * dtype_size(dtype));
    for (std::size_t i = 0; i < n; ++i) {
      unsigned char* dst = a.bytes.data() + i * dtype_size(dtype);
      if (dtype == DType::kF64) {
        const double v = detail::to_little(data[i]);
        std::memcpy(dst, &v, 8);
      } else if (dtype == DType::kF32) {
        const float v = detail::to_little(static_cast<float>(data[i]));
        std::memcpy(dst, &v, 4);
      } else {
        const auto v = detail::to_little(static_cast<std::int32_t>(data[i]));
        std::memcpy(dst, &v, 4);
      }
    }
    arrays_[name] = std::move(a);
  }

  void put_ints(const std::string& name, std::vector<std::int64_t> shape, const std::vector<int>& data) {
    std::vector<double> tmp(data.begin(), data.end());
    put(name, DType::kI32, std::move(shape), tmp.data());
  }

  template <typename Derived>
  void put_matrix(const std::string& name, const Eigen::DenseBase<Derived>& m, DType dtype = DType::kF64) {
    // Row-major copy regardless of the source storage order.
    const RowMatX rm = m.template cast<double>();
    put(name, dtype, {static_cast<std::int64_t>(rm.rows()), static_cast<std::int64_t>(rm.cols())}, rm.data());
  }

  const Array& get(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw FormatError("container '" + kind + "' has no array '" + name + "'");
    return it->second;
  }

  std::vector<double> values(const std::string& name) const {
    const Array& a = get(name);
    const auto n = static_cast<std::size_t>(a.count());
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned char* src = a.bytes.data() + i * dtype_size(a.dtype);
      if (a.dtype == DType::kF64) {
        double v;
        std::memcpy(&v, src, 8);
        out[i] = detail::to_little(v);
      } else if (a.dtype == DType::kF32) {
        float v;
        std::memcpy(&v, src, 4);
        out[i] = detail::to_little(v);
      } else {
        std::int32_t v;
        std::memcpy(&v, src, 4);
        out[i] = detail::to_little(v);
      }
    }
    return out;
  }

  std::vector<int> ints(const std::string& name) const {
    const auto v = values(name);
    return std::vector<int>(v.begin(), v.end());
  }

  /// 2-D view of an array; 1-D arrays become a single row, higher ranks
  /// fold trailing dimensions into columns.
  RowMatX matrix(const std::string& name) const {
    const Array& a = get(name);
    const auto v = values(name);
    Eigen::Index rows = 1, cols = 1;
    if (a.shape.size() == 1) {
      cols = a.shape[0];
    } else if (a.shape.size() >= 2) {
      rows = a.shape[0];
      for (std::size_t d = 1; d < a.shape.size(); ++d) cols *= a.shape[d];
    }
    RowMatX m(rows, cols);
    if (!v.empty()) std::memcpy(m.data(), v.data(), v.size() * sizeof(double));
    return m;
  }

  std::vector<std::int64_t> shape(const std::string& name) const { return get(name).shape; }

  std::vector<unsigned char> encode() const {
    nlohmann::json header;
    header["kind"] = kind;
    header["version"] = version;
    header["meta"] = meta;
    header["arrays"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, a] : arrays_) {
      header["arrays"].push_back({{"name", name},
                                  {"dtype", dtype_name(a.dtype)},
                                  {"shape", a.shape},
                                  {"offset", offset},
                                  {"nbytes", a.bytes.size()}});
      offset += (a.bytes.size() + 7) / 8 * 8;
    }
    const std::string text = header.dump();
    std::vector<unsigned char> out(24);
    std::memcpy(out.data(), kContainerMagic, 8);
    const std::uint32_t ver = detail::to_little(kContainerVersion);
    std::memcpy(out.data() + 8, &ver, 4);
    const std::uint64_t len = detail::to_little(static_cast<std::uint64_t>(text.size()));
    std::memcpy(out.data() + 16, &len, 8);
    out.insert(out.end(), text.begin(), text.end());
    out.resize((out.size() + 7) / 8 * 8, 0);
    for (const auto& [name, a] : arrays_) {
      out.insert(out.end(), a.bytes.begin(), a.bytes.end());
      out.resize((out.size() + 7) / 8 * 8, 0);
    }
    return out;
  }

  static Container decode(const std::vector<unsigned char>& buf) {
    if (buf.size() < 24 || std::memcmp(buf.data(), kContainerMagic, 8) != 0)
      throw FormatError("not a hoisynth container (bad magic)");
    std::uint32_t ver;
    std::memcpy(&ver, buf.data() + 8, 4);
    if (detail::to_little(ver) != kContainerVersion)
      throw FormatError("unsupported container version " + std::to_string(detail::to_little(ver)));
    std::uint64_t len;
    std::memcpy(&len, buf.data() + 16, 8);
    len = detail::to_little(len);
    if (24 + len > buf.size()) throw FormatError("truncated container header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(buf.begin() + 24, buf.begin() + 24 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("container header is not valid JSON: ") + e.what());
    }
    const std::size_t blob = (24 + len + 7) / 8 * 8;
    Container c;
    c.kind = header.value("kind", "");
    c.version = header.value("version", 0);
    c.meta = header.value("meta", nlohmann::json::object());
    for (const auto& a : header.at("arrays")) {
      Array arr;
      arr.dtype = parse_dtype(a.at("dtype").get<std::string>());
      arr.shape = a.at("shape").get<std::vector<std::int64_t>>();
      const auto off = a.at("offset").get<std::uint64_t>();
      const auto nbytes = a.at("nbytes").get<std::uint64_t>();
      if (nbytes != static_cast<std::uint64_t>(arr.count()) * dtype_size(arr.dtype))
        throw FormatError("array '" + a.at("name").get<std::string>() + "' size does not match its shape");
      if (blob + off + nbytes > buf.size()) throw FormatError("truncated container data");
      arr.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(blob + off),
                       buf.begin() + static_cast<std::ptrdiff_t>(blob + off + nbytes));
      c.arrays_[a.at("name").get<std::string>()] = std::move(arr);
    }
    return c;
  }

 private:
  std::map<std::string, Array> arrays_;
};

/// Write-temp-then-rename so readers never observe a partial file.
inline void write_file_atomic(const std::string& path, const std::vector<unsigned char>& bytes) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open '" + tmp + "' for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, target);
}

inline void write_text_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, std::vector<unsigned char>(text.begin(), text.end()));
}

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline void save_container(const std::string& path, const Container& c) { write_file_atomic(path, c.encode()); }

inline Container load_container(const std::string& path, const std::string& expected_kind = {}) {
  Container c = Container::decode(read_file(path));
  if (!expected_kind.empty() && c.kind != expected_kind)
    throw FormatError("'" + path + "' holds a '" + c.kind + "' container, expected '" + expected_kind + "'");
  return c;
}

}  // namespace hoisynth
