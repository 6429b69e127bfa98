#pragma once

#include <png.h>
#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefcost/error.hpp"
#include "prefcost/grid.hpp"
#include "prefcost/masks.hpp"
#include "prefcost/planner.hpp"
#include "prefcost/preference.hpp"
#include "prefcost/recovery.hpp"
#include "prefcost/terrain.hpp"

namespace prefcost::io {

using json = nlohmann::json;
using Bytes = std::vector<std::uint8_t>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// 16-bit PGM costmaps.
//
// Binary P5, maxval 65535, big-endian samples. Cell values are quantized
// linearly between the map's min and max, which are stored losslessly in a
// "# prefcost-range <lo> <hi>" comment. Files without the comment decode
// as sample / maxval.

inline constexpr std::uint32_t kPgmMax = 65535;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Bytes encode_pgm(const Costmap& costmap) {
  require_finite(costmap, "costmap");
  if (costmap.empty()) fail(ErrorCode::InvalidArgument, "cannot encode an empty costmap");
  const double lo = min_value(costmap), hi = max_value(costmap);
  std::string header = "P5\n# prefcost-range " + format_double(lo) + " " + format_double(hi) + "\n" +
                       std::to_string(costmap.cols()) + " " + std::to_string(costmap.rows()) + "\n65535\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + 2 * costmap.size());
  for (double v : costmap.values()) {
    std::uint32_t q = 0;
    if (hi > lo) q = v == hi ? kPgmMax : static_cast<std::uint32_t>(std::lround((v - lo) / (hi - lo) * kPgmMax));
    out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xFF));
  }
  return out;
}

inline Costmap decode_pgm(const Bytes& bytes) {
  std::size_t pos = 0;
  bool has_range = false;
  double lo = 0.0, hi = 1.0;
  // Reads the next whitespace-delimited header token, collecting comments.
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        const std::size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        std::istringstream comment(std::string(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.begin() + static_cast<std::ptrdiff_t>(pos)));
        std::string hash, key;
        comment >> hash >> key;
        if (key == "prefcost-range" && (comment >> lo >> hi)) has_range = true;
        continue;
      }
      break;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    if (t.empty()) fail(ErrorCode::FormatError, "truncated PGM header");
    return t;
  };
  if (token() != "P5") fail(ErrorCode::FormatError, "not a binary PGM");
  int width = 0, height = 0;
  long maxval = 0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    maxval = std::stol(token());
  } catch (const std::exception&) {
    fail(ErrorCode::FormatError, "malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) fail(ErrorCode::FormatError, "unsupported PGM geometry");
  ++pos;  // single whitespace before the raster
  const std::size_t sample = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() < pos + n * sample) fail(ErrorCode::FormatError, "truncated PGM raster");
  Costmap out(height, width);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t q = sample == 2 ? (static_cast<std::uint32_t>(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1] : bytes[pos + i];
    if (q > static_cast<std::uint32_t>(maxval)) fail(ErrorCode::FormatError, "PGM sample above maxval");
    if (has_range)
      out.storage()[i] = q == static_cast<std::uint32_t>(maxval) ? hi : lo + (hi - lo) * (static_cast<double>(q) / static_cast<double>(maxval));
    else
      out.storage()[i] = static_cast<double>(q) / static_cast<double>(maxval);
  }
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const Costmap& c) { write_file(path, encode_pgm(c)); }
inline Costmap read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

// ---------------------------------------------------------------------------
// 8-bit RGB PNG via libpng's simplified API.

inline Bytes encode_png(const RgbImage& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.cols());
  img.height = static_cast<png_uint_32>(image.rows());
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raster;
  raster.reserve(image.size() * 3);
  for (const Rgb& px : image.values()) raster.insert(raster.end(), px.begin(), px.end());
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raster.data(), 0, nullptr))
    fail(ErrorCode::IoError, std::string("png sizing failed: ") + img.message);
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, raster.data(), 0, nullptr))
    fail(ErrorCode::IoError, std::string("png encoding failed: ") + img.message);
  out.resize(size);
  return out;
}

inline RgbImage decode_png(const Bytes& bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    fail(ErrorCode::FormatError, std::string("not a PNG: ") + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raster.data(), 0, nullptr))
    fail(ErrorCode::FormatError, std::string("png decoding failed: ") + img.message);
  RgbImage out(static_cast<int>(img.height), static_cast<int>(img.width));
  for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] = {raster[3 * i], raster[3 * i + 1], raster[3 * i + 2]};
  return out;
}

/// Binary PPM (P6, maxval 255); accepted for terrain tiles.
inline RgbImage decode_ppm(const Bytes& bytes) {
  std::string header(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(bytes.size(), 64)));
  std::istringstream in(header);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) fail(ErrorCode::FormatError, "unsupported PPM");
  const std::size_t start = static_cast<std::size_t>(in.tellg()) + 1;
  if (bytes.size() < start + static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3) fail(ErrorCode::FormatError, "truncated PPM");
  RgbImage out(h, w);
  for (std::size_t i = 0; i < out.size(); ++i) out.storage()[i] = {bytes[start + 3 * i], bytes[start + 3 * i + 1], bytes[start + 3 * i + 2]};
  return out;
}

// ---------------------------------------------------------------------------
// JSON encodings.

inline json context_to_json(const PreferenceContext& context) {
  json out = json::array();
  for (const auto& p : context) out.push_back({{"preferred", p.preferred}, {"other", p.other}, {"alpha", p.strength}});
  return out;
}

inline PreferenceContext context_from_json(const json& j) {
  if (!j.is_array()) fail(ErrorCode::FormatError, "context must be a JSON array");
  PreferenceContext out;
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("preferred") || !e.contains("other") || !e.contains("alpha"))
      fail(ErrorCode::FormatError, "context entries need preferred, other and alpha");
    if (!e["preferred"].is_number_integer() || !e["other"].is_number_integer() || !e["alpha"].is_number())
      fail(ErrorCode::FormatError, "context entry has wrong field types");
    ScaledPreference p{e["preferred"].get<ClassId>(), e["other"].get<ClassId>(), e["alpha"].get<double>()};
    if (p.preferred < 0 || p.other < 0) fail(ErrorCode::FormatError, "class ids must be non-negative");
    validate(p);
    out.push_back(p);
  }
  return out;
}

/// Masks as run lengths over the row-major raster; each list alternates
/// absent/present runs and starts with an absent run (possibly 0).
inline json masks_to_json(const SegmentationMaskSet& masks) {
  json list = json::array();
  const auto& labels = masks.labels().storage();
  for (int m = 0; m < masks.count(); ++m) {
    json runs = json::array();
    bool state = false;
    std::size_t run = 0;
    for (int v : labels) {
      if ((v == m) != state) {
        runs.push_back(run);
        run = 0;
        state = !state;
      }
      ++run;
    }
    runs.push_back(run);
    list.push_back(runs);
  }
  return {{"rows", masks.rows()}, {"cols", masks.cols()}, {"class_ids", masks.class_ids()}, {"masks", list}};
}

inline SegmentationMaskSet masks_from_json(const json& j) {
  try {
    const int rows = j.at("rows").get<int>(), cols = j.at("cols").get<int>();
    const auto ids = j.at("class_ids").get<std::vector<ClassId>>();
    const auto& list = j.at("masks");
    if (rows < 0 || cols < 0 || list.size() != ids.size()) fail(ErrorCode::FormatError, "mask header inconsistent");
    const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    Grid<int> labels(rows, cols, -1);
    for (std::size_t m = 0; m < list.size(); ++m) {
      std::size_t pos = 0;
      bool state = false;
      for (const auto& r : list[m]) {
        const std::size_t len = r.get<std::size_t>();
        if (pos + len > n) fail(ErrorCode::FormatError, "mask runs overflow the grid");
        if (state)
          for (std::size_t i = pos; i < pos + len; ++i) {
            if (labels.storage()[i] != -1) fail(ErrorCode::FormatError, "masks overlap");
            labels.storage()[i] = static_cast<int>(m);
          }
        pos += len;
        state = !state;
      }
      if (pos != n) fail(ErrorCode::FormatError, "mask runs do not cover the grid");
    }
    for (int v : labels.values())
      if (v < 0) fail(ErrorCode::FormatError, "masks leave a cell uncovered");
    return SegmentationMaskSet(std::move(labels), ids);
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, std::string("masks json: ") + e.what());
  }
}

inline json path_to_json(const LatticePath& path, double cost) {
  json poses = json::array(), cells = json::array();
  for (const Pose& p : path.poses) poses.push_back({p.row, p.col, p.heading});
  for (const Cell& c : path.cells) cells.push_back({c.row, c.col});
  return {{"poses", poses}, {"cells", cells}, {"cost", cost}};
}

inline LatticePath path_from_json(const json& j) {
  try {
    LatticePath path;
    for (const auto& p : j.at("poses")) path.poses.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>()});
    for (const auto& c : j.at("cells")) path.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    return path;
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, std::string("path json: ") + e.what());
  }
}

inline json class_costs_to_json(const ClassCosts& costs) {
  json out = json::array();
  for (const auto& [id, cost] : costs) out.push_back({{"class", id}, {"cost", cost}});
  return out;
}

inline json solve_report_to_json(const SolveReport& r) {
  return {{"class_costs", class_costs_to_json(r.class_costs)},
          {"residual_norm", r.residual_norm},
          {"iterations", r.iterations},
          {"converged", r.converged}};
}

// ---------------------------------------------------------------------------
// Scenario directories: image.png, masks.json, costmap.pgm, meta.json.

inline json scenario_meta(const Scenario& s) {
  json classes = json::array();
  for (const auto& [id, cost] : s.class_costs) {
    auto it = s.labels.find(id);
    classes.push_back({{"class", id}, {"cost", cost}, {"label", it == s.labels.end() ? std::to_string(id) : it->second}});
  }
  return {{"schema", 1}, {"seed", s.seed}, {"classes", classes}, {"context", context_to_json(s.context)}};
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "image.png", encode_png(s.image));
  write_text(dir / "masks.json", masks_to_json(s.masks).dump());
  write_pgm(dir / "costmap.pgm", s.target_costmap);
  write_text(dir / "meta.json", scenario_meta(s).dump(2));
}

/// The target costmap is repainted from masks and class costs, which are
/// stored exactly; costmap.pgm is the quantized interchange copy.
inline Scenario load_scenario(const std::filesystem::path& dir) {
  Scenario s;
  s.image = decode_png(read_file(dir / "image.png"));
  s.masks = masks_from_json(parse_json(read_text(dir / "masks.json"), "masks.json"));
  const json meta = parse_json(read_text(dir / "meta.json"), "meta.json");
  try {
    s.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& c : meta.at("classes")) {
      const ClassId id = c.at("class").get<ClassId>();
      s.class_costs[id] = c.at("cost").get<double>();
      s.labels[id] = c.at("label").get<std::string>();
    }
    s.context = context_from_json(meta.at("context"));
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, std::string("meta.json: ") + e.what());
  }
  validate(s.class_costs);
  if (!same_shape(s.image, s.masks.labels())) fail(ErrorCode::FormatError, "image and masks differ in size");
  s.target_costmap = paint_costmap(s.masks, s.class_costs);
  return s;
}

// ---------------------------------------------------------------------------
// Terrain bank directories: bank.json lists {"id", "name", "tile"} entries;
// tiles are PNG or binary PPM files next to it.

inline TerrainBank load_bank(const std::filesystem::path& dir) {
  const json j = parse_json(read_text(dir / "bank.json"), "bank.json");
  TerrainBank bank;
  try {
    for (const auto& t : j.at("terrains")) {
      const ClassId id = t.at("id").get<ClassId>();
      const std::filesystem::path tile = dir / t.at("tile").get<std::string>();
      const Bytes bytes = read_file(tile);
      bank.textures[id] = tile.extension() == ".ppm" ? decode_ppm(bytes) : decode_png(bytes);
      bank.names[id] = t.value("name", std::to_string(id));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::FormatError, std::string("bank.json: ") + e.what());
  }
  bank.validate();
  return bank;
}

inline void save_bank(const TerrainBank& bank, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  for (const auto& [id, tile] : bank.textures) {
    auto it = bank.names.find(id);
    const std::string name = it == bank.names.end() ? std::to_string(id) : it->second;
    const std::string file = std::to_string(id) + "_" + name + ".png";
    write_file(dir / file, encode_png(tile));
    list.push_back({{"id", id}, {"name", name}, {"tile", file}});
  }
  write_text(dir / "bank.json", json{{"terrains", list}}.dump(2));
}

// ---------------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) fail(ErrorCode::IoError, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string base64_encode(const Bytes& bytes) {
  static const char* table = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t b0 = bytes[i];
    const std::uint32_t b1 = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < bytes.size() ? bytes[i + 2] : 0;
    const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
    out.push_back(table[(v >> 18) & 63]);
    out.push_back(table[(v >> 12) & 63]);
    out.push_back(i + 1 < bytes.size() ? table[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < bytes.size() ? table[v & 63] : '=');
  }
  return out;
}

inline Bytes base64_decode(std::string_view text) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  Bytes out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) fail(ErrorCode::FormatError, "invalid base64");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace prefcost::io
