// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// File formats.
//
//   MMPC v1  point cloud: "MMPC", u32 LE count n, then n records of four
//            LE float32 (x, y, z, intensity).
//   TNSR v1  tensor: one JSON header line {"shape":[C,D,H,W]}\n followed by
//            the LE float64 payload in row-major order.
//   Boxes    JSON lines; keys center[3], dims[3], R[9] (row-major),
//            category, optional score and image_id.

#ifndef BEVKIT_IO_HPP
#define BEVKIT_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevkit/common.hpp"
#include "bevkit/geom.hpp"

namespace bevkit::io {

using nlohmann::json;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

// --- MMPC -------------------------------------------------------------------

inline std::string encode_mmpc(const PointCloud& pc) {
  std::string out = "MMPC";
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(pc.size()));
  out.reserve(8 + 16 * pc.size());
  for (const auto& p : pc) {
    detail::put_le<float>(out, static_cast<float>(p.x));
    detail::put_le<float>(out, static_cast<float>(p.y));
    detail::put_le<float>(out, static_cast<float>(p.z));
    detail::put_le<float>(out, static_cast<float>(p.intensity));
  }
  return out;
}

inline PointCloud decode_mmpc(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "MMPC") != 0) throw DataError("MMPC: bad magic");
  const auto n = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (bytes.size() != 8 + 16 * static_cast<std::size_t>(n)) throw DataError("MMPC: size does not match point count");
  PointCloud pc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const char* r = bytes.data() + 8 + 16 * i;
    pc[i] = {detail::get_le<float>(r), detail::get_le<float>(r + 4), detail::get_le<float>(r + 8),
             detail::get_le<float>(r + 12)};
    if (!std::isfinite(pc[i].x) || !std::isfinite(pc[i].y) || !std::isfinite(pc[i].z))
      throw DataError("MMPC: non-finite coordinate");
  }
  return pc;
}

inline void write_mmpc(const std::string& path, const PointCloud& pc) { write_file(path, encode_mmpc(pc)); }
inline PointCloud read_mmpc(const std::string& path) { return decode_mmpc(read_file(path)); }

// --- TNSR -------------------------------------------------------------------

inline std::string encode_tensor(const FeatureMap& fm) {
  const auto& s = fm.shape();
  std::string out = json{{"shape", {s[0], s[1], s[2], s[3]}}}.dump();
  out.push_back('\n');
  out.reserve(out.size() + 8 * fm.size());
  for (double v : fm.data()) detail::put_le<double>(out, v);
  return out;
}

inline FeatureMap decode_tensor(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError("TNSR: missing header line");
  json header;
  try {
    header = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw DataError(std::string("TNSR: bad header: ") + e.what());
  }
  if (!header.contains("shape") || !header["shape"].is_array() || header["shape"].size() != 4)
    throw DataError("TNSR: header needs a 4-element shape");
  FeatureMap::Shape shape{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!header["shape"][i].is_number_unsigned()) throw DataError("TNSR: shape entries must be non-negative integers");
    shape[i] = header["shape"][i].get<std::size_t>();
  }
  const std::size_t n = FeatureMap::element_count(shape);
  if (bytes.size() - nl - 1 != 8 * n) throw DataError("TNSR: payload size does not match shape");
  std::vector<double> data(n);
  const char* p = bytes.data() + nl + 1;
  for (std::size_t i = 0; i < n; ++i) data[i] = detail::get_le<double>(p + 8 * i);
  FeatureMap fm(shape, std::move(data));
  if (!fm.all_finite()) throw DataError("TNSR: non-finite element");
  return fm;
}

inline void write_tensor(const std::string& path, const FeatureMap& fm) { write_file(path, encode_tensor(fm)); }
inline FeatureMap read_tensor(const std::string& path) { return decode_tensor(read_file(path)); }

// --- JSON helpers -----------------------------------------------------------

inline json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw DataError(std::string("intrinsics: ") + e.what());
  }
  k.validate();
  return k;
}

inline json matrix_to_json(const Mat3& r) {
  json a = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(r(i, j));
  return a;
}

inline Mat3 matrix_from_json(const json& a) {
  if (!a.is_array() || a.size() != 9) throw DataError("rotation must have 9 entries");
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[3 * i + j].get<double>();
  return r;
}

inline json vec_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline Vec3 vec_from_json(const json& a) {
  if (!a.is_array() || a.size() != 3) throw DataError("vector must have 3 entries");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline json pose_to_json(const Pose& p) { return {{"R", matrix_to_json(p.rotation)}, {"t", vec_to_json(p.translation)}}; }

inline Pose pose_from_json(const json& j) {
  Pose p;
  try {
    p.rotation = matrix_from_json(j.at("R"));
    p.translation = vec_from_json(j.at("t"));
  } catch (const json::exception& e) {
    throw DataError(std::string("pose: ") + e.what());
  }
  p.validate();
  return p;
}

inline json load_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// --- Boxes ------------------------------------------------------------------

inline json box_to_json(const Box3D& b) {
  json j{{"center", vec_to_json(b.center)},
         {"dims", vec_to_json(b.dims)},
         {"R", matrix_to_json(b.rotation)},
         {"category", b.category},
         {"image_id", b.image_id}};
  if (b.has_score) j["score"] = b.score;
  return j;
}

inline Box3D box_from_json(const json& j) {
  Box3D b;
  try {
    b.center = vec_from_json(j.at("center"));
    b.dims = vec_from_json(j.at("dims"));
    b.rotation = matrix_from_json(j.at("R"));
    b.category = j.at("category").get<int>();
    b.image_id = j.value("image_id", std::int64_t{0});
    if (j.contains("score")) {
      b.score = j.at("score").get<double>();
      b.has_score = true;
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("box: ") + e.what());
  }
  try {
    b.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return b;
}

inline std::string encode_boxes(const std::vector<Box3D>& boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += box_to_json(b).dump();
    out.push_back('\n');
  }
  return out;
}

inline std::vector<Box3D> decode_boxes(const std::string& text) {
  std::vector<Box3D> boxes;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      boxes.push_back(box_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("boxes line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("boxes line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return boxes;
}

inline void write_boxes(const std::string& path, const std::vector<Box3D>& boxes) {
  write_file(path, encode_boxes(boxes));
}
inline std::vector<Box3D> read_boxes(const std::string& path) { return decode_boxes(read_file(path)); }

}  // namespace bevkit::io

#endif  // BEVKIT_IO_HPP
