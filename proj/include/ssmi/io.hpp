#pragma once

// Little-endian binary formats for grids and octrees, plus a lossless JSON
// export for small maps.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssmi/errors.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/octree.hpp"

namespace ssmi {

namespace detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void bytes(const char* p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }

  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    os_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  void f32(double v) { put(static_cast<float>(v)); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  void bytes(char* p, std::size_t n) {
    is_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError("unexpected end of data");
  }

  template <typename T>
  T get() {
    unsigned char buf[sizeof(T)];
    bytes(reinterpret_cast<char*>(buf), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  double f32() { return static_cast<double>(get<float>()); }

  void expect_magic(const char (&magic)[9]) {
    char got[8];
    bytes(got, 8);
    if (std::memcmp(got, magic, 8) != 0) {
      throw FormatError("bad magic, expected " + std::string(magic, 8));
    }
  }

 private:
  std::istream& is_;
};

inline LogOddsVector read_logodds(BinaryReader& r, std::size_t k) {
  std::vector<double> v(k + 1);
  for (double& x : v) x = r.f32();
  if (v[0] != 0.0) throw FormatError("log-odds pivot is not zero");
  for (double x : v) {
    if (!std::isfinite(x)) throw FormatError("non-finite log-odds");
  }
  return LogOddsVector::from_values(std::move(v));
}

}  // namespace detail

inline constexpr std::uint16_t kGridFormatVersion = 1;

/// Header: "SSMIGRID", u16 version, u32 x3 dims, f64 resolution, u16 K,
/// f64 x3 origin, f32 x(K+1) prior. Body: f32 x(K+1) per cell, x fastest.
inline void write_grid(std::ostream& os, const GridMap& map) {
  detail::BinaryWriter w(os);
  w.bytes("SSMIGRID", 8);
  w.put<std::uint16_t>(kGridFormatVersion);
  for (int a = 0; a < 3; ++a) w.put<std::uint32_t>(static_cast<std::uint32_t>(map.frame().dims[a]));
  w.put<double>(map.frame().resolution);
  w.put<std::uint16_t>(static_cast<std::uint16_t>(map.num_classes()));
  for (int a = 0; a < 3; ++a) w.put<double>(map.frame().origin[a]);
  for (double x : map.prior().values()) w.f32(x);
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    for (double x : map.cell(i)) w.f32(x);
  }
}

inline GridMap read_grid(std::istream& is) {
  detail::BinaryReader r(is);
  r.expect_magic("SSMIGRID");
  const auto version = r.get<std::uint16_t>();
  if (version != kGridFormatVersion) throw FormatError("unsupported grid version " + std::to_string(version));
  GridFrame frame;
  for (int a = 0; a < 3; ++a) {
    const auto d = r.get<std::uint32_t>();
    if (d == 0 || d > 1u << 20) throw FormatError("implausible grid extent");
    frame.dims[a] = static_cast<std::int32_t>(d);
  }
  frame.resolution = r.get<double>();
  const auto k = r.get<std::uint16_t>();
  if (k < 1) throw FormatError("grid must have K >= 1");
  for (int a = 0; a < 3; ++a) frame.origin[a] = r.get<double>();
  GridMap map(frame, detail::read_logodds(r, k));
  for (std::size_t i = 0; i < map.cell_count(); ++i) map.set(i, detail::read_logodds(r, k));
  return map;
}

/// Header: "SSMIOCT1", f64 element size, u8 max depth, u16 K, f64 x3 origin,
/// f32 x(K+1) prior. Then nodes in preorder: u8 child mask (0 or 0xFF),
/// f32 occupancy, u8 count, (u16 class, f32 log-odds) x count, f32 others.
inline void write_octree(std::ostream& os, const SemanticOctree& tree) {
  detail::BinaryWriter w(os);
  w.bytes("SSMIOCT1", 8);
  w.put<double>(tree.element_size());
  w.put<std::uint8_t>(static_cast<std::uint8_t>(tree.max_depth()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(tree.num_classes()));
  for (int a = 0; a < 3; ++a) w.put<double>(tree.frame().origin[a]);
  for (double x : tree.prior().values()) w.f32(x);
  auto node = [&](auto&& self, const SemanticNode& n) -> void {
    w.put<std::uint8_t>(n.is_leaf() ? 0x00 : 0xFF);
    w.f32(n.occupancy);
    // Entries are ordered by their stored f32 value so that a reader's sort
    // reproduces the file order.
    std::vector<ClassLogOdds> data(n.semantics.data().begin(), n.semantics.data().end());
    for (ClassLogOdds& c : data) c.logodds = static_cast<float>(c.logodds);
    std::stable_sort(data.begin(), data.end(), [](const ClassLogOdds& a, const ClassLogOdds& b) {
      if (a.logodds != b.logodds) return a.logodds > b.logodds;
      return a.id < b.id;
    });
    w.put<std::uint8_t>(static_cast<std::uint8_t>(data.size()));
    for (const ClassLogOdds& c : data) {
      w.put<std::uint16_t>(c.id);
      w.f32(c.logodds);
    }
    w.f32(n.semantics.others());
    if (!n.is_leaf()) {
      for (const SemanticNode& c : *n.children) self(self, c);
    }
  };
  node(node, tree.root());
}

inline SemanticOctree read_octree(std::istream& is, std::optional<SensorParams> params = std::nullopt) {
  detail::BinaryReader r(is);
  r.expect_magic("SSMIOCT1");
  const double element_size = r.get<double>();
  const int depth = r.get<std::uint8_t>();
  const std::size_t k = r.get<std::uint16_t>();
  if (k < 1) throw FormatError("octree must have K >= 1");
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = r.get<double>();
  LogOddsVector prior = detail::read_logodds(r, k);
  if (depth < 1 || depth > SemanticOctree::kMaxDepth) throw FormatError("bad octree depth");
  if (!(element_size > 0.0)) throw FormatError("bad element size");
  SemanticOctree tree(depth, element_size, origin, prior,
                      params ? *params : SensorParams::make_default(k));
  auto node = [&](auto&& self, SemanticNode& n, int d) -> void {
    const auto mask = r.get<std::uint8_t>();
    if (mask != 0x00 && mask != 0xFF) throw FormatError("child mask must be 0 or 0xFF");
    if (mask == 0xFF && d >= depth) throw FormatError("children below element depth");
    n.occupancy = r.f32();
    const std::size_t count = r.get<std::uint8_t>();
    if (count > kTrackedClasses || count > k) throw FormatError("too many tracked classes");
    std::vector<ClassLogOdds> data(count);
    for (ClassLogOdds& c : data) {
      c.id = r.get<std::uint16_t>();
      c.logodds = r.f32();
    }
    const double others = r.f32();
    try {
      n.semantics = TruncatedSemantics::from_parts(k, data, others);
    } catch (const Error& e) {
      throw FormatError(std::string("bad node semantics: ") + e.what());
    }
    n.children.reset();
    if (mask == 0xFF) {
      n.children = std::make_unique<std::array<SemanticNode, 8>>();
      for (SemanticNode& c : *n.children) self(self, c, d + 1);
    }
  };
  node(node, tree.root_mut(), 0);
  return tree;
}

inline void save_grid(const std::string& path, const GridMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_grid(os, map);
}

inline GridMap load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_grid(is);
}

inline void save_octree(const std::string& path, const SemanticOctree& tree) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_octree(os, tree);
}

inline SemanticOctree load_octree(const std::string& path,
                                  std::optional<SensorParams> params = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_octree(is, std::move(params));
}

/// Reads the 8-byte magic without consuming the stream position.
inline std::string sniff_magic(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  char m[8] = {};
  is.read(m, 8);
  return std::string(m, static_cast<std::size_t>(is.gcount()));
}

inline nlohmann::json grid_to_json(const GridMap& map) {
  nlohmann::json j;
  j["format"] = "ssmi-grid";
  j["dims"] = map.frame().dims;
  j["resolution"] = map.frame().resolution;
  j["origin"] = {map.frame().origin.x, map.frame().origin.y, map.frame().origin.z};
  j["prior"] = std::vector<double>(map.prior().values().begin(), map.prior().values().end());
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    const auto c = map.cell(i);
    cells.push_back(std::vector<double>(c.begin(), c.end()));
  }
  j["cells"] = std::move(cells);
  return j;
}

inline GridMap grid_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "ssmi-grid") throw FormatError("not a grid document");
    GridFrame frame;
    frame.dims = j.at("dims").get<std::array<std::int32_t, 3>>();
    frame.resolution = j.at("resolution").get<double>();
    const auto o = j.at("origin").get<std::array<double, 3>>();
    frame.origin = {o[0], o[1], o[2]};
    GridMap map(frame, LogOddsVector::from_values(j.at("prior").get<std::vector<double>>()));
    const auto& cells = j.at("cells");
    if (cells.size() != map.cell_count()) throw FormatError("cell count does not match dims");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      map.set(i, LogOddsVector::from_values(cells[i].get<std::vector<double>>()));
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(e.what());
  }
}

}  // namespace ssmi
