#include "homscope/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "homscope/error.hpp"

namespace homscope {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

CsvWriter& CsvWriter::add(const std::string& s) {
  if (in_row_) text_ += ',';
  text_ += s;
  ++in_row_;
  return *this;
}

CsvWriter& CsvWriter::add(double v) { return add(format_number(v)); }
CsvWriter& CsvWriter::add(long long v) { return add(std::to_string(v)); }
CsvWriter& CsvWriter::add(unsigned long long v) { return add(std::to_string(v)); }

void CsvWriter::end_row() {
  if (in_row_ != columns_)
    fail(ErrorKind::io, "CSV row has " + std::to_string(in_row_) + " fields, expected " +
                            std::to_string(columns_));
  text_ += '\n';
  in_row_ = 0;
}

void CsvWriter::save(const std::string& path) const { write_file(path, text_); }

void write_file(const std::string& path, const std::string& contents) {
  std::error_code ec;
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sidecar_path(const std::string& csv_path) {
  fs::path p(csv_path);
  p.replace_extension(".json");
  return p.string();
}

namespace {

std::vector<std::string> matrix_header(int width) {
  std::vector<std::string> h;
  for (int c = 0; c < width; ++c) h.push_back("c" + std::to_string(c));
  return h;
}

template <class Fn>
std::string matrix_csv(int width, int height, Fn&& cell) {
  CsvWriter w(matrix_header(width));
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) cell(w, r, c);
    w.end_row();
  }
  return w.text();
}

double parse_double(std::string_view s, const std::string& where) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    fail(ErrorKind::config, where + ": not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace

void save_sample_map(const SampleMap& map, const std::string& csv_path) {
  map.validate();
  write_file(csv_path, matrix_csv(map.width_px, map.height_px, [&](CsvWriter& w, int r, int c) {
               w.add(map.at(r, c));
             }));
  json j = {{"width_px", map.width_px},
            {"height_px", map.height_px},
            {"pixel_pitch_m", map.pixel_pitch_m},
            {"refractive_index", map.refractive_index},
            {"substrate_delay_s", map.substrate_delay_s},
            {"height_unit", "m"}};
  write_file(sidecar_path(csv_path), j.dump(2) + "\n");
}

SampleMap load_sample_map(const std::string& csv_path) {
  std::string text;
  try {
    text = read_file(csv_path);
  } catch (const Error&) {
    fail(ErrorKind::config, "sample file not found: " + csv_path);
  }
  SampleMap map;
  map.height_m.clear();
  std::istringstream in(text);
  std::string line;
  int rows = 0, width = -1;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find_first_not_of("0123456789.eE+-, \t") != std::string::npos) continue;
    }
    int cols = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell(line.data() + start,
                                  (comma == std::string::npos ? line.size() : comma) - start);
      map.height_m.push_back(parse_double(cell, csv_path + " row " + std::to_string(rows + 1)));
      ++cols;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (width < 0) width = cols;
    if (cols != width) fail(ErrorKind::config, csv_path + ": rows have differing lengths");
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::config, csv_path + ": no height values");
  map.width_px = width;
  map.height_px = rows;

  const std::string side = sidecar_path(csv_path);
  if (fs::exists(side)) {
    json j;
    try {
      j = json::parse(read_file(side));
    } catch (const json::exception& e) {
      fail(ErrorKind::config, side + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::config, side + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k != "width_px" && k != "height_px" && k != "pixel_pitch_m" && k != "refractive_index" &&
          k != "substrate_delay_s" && k != "height_unit")
        fail(ErrorKind::config, side + ": unknown key '" + k + "'");
    }
    try {
      if (j.contains("width_px") && j["width_px"].get<int>() != width)
        fail(ErrorKind::config, side + ": width_px does not match the CSV");
      if (j.contains("height_px") && j["height_px"].get<int>() != rows)
        fail(ErrorKind::config, side + ": height_px does not match the CSV");
      if (j.contains("height_unit") && j["height_unit"].get<std::string>() != "m")
        fail(ErrorKind::config, side + ": height_unit must be \"m\"");
      if (j.contains("pixel_pitch_m")) map.pixel_pitch_m = j["pixel_pitch_m"].get<double>();
      if (j.contains("refractive_index")) map.refractive_index = j["refractive_index"].get<double>();
      if (j.contains("substrate_delay_s")) map.substrate_delay_s = j["substrate_delay_s"].get<double>();
    } catch (const json::exception& e) {
      fail(ErrorKind::config, side + ": " + e.what());
    }
  }
  try {
    map.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, csv_path + ": " + e.what());
  }
  return map;
}

std::string depth_pgm(const DepthImage& image) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : image.pixels) {
    if (p.status != PixelStatus::ok) continue;
    lo = std::min(lo, p.estimate.depth_m);
    hi = std::max(hi, p.estimate.depth_m);
  }
  std::string out = "P5\n" + std::to_string(image.width_px) + " " + std::to_string(image.height_px) +
                    "\n65535\n";
  for (const auto& p : image.pixels) {
    unsigned v = 0;
    if (p.status == PixelStatus::ok) {
      const double u = hi > lo ? (p.estimate.depth_m - lo) / (hi - lo) : 0.5;
      v = 1 + static_cast<unsigned>(std::lround(u * 65534.0));
    }
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

void save_depth_image(const DepthImage& image, const std::string& directory,
                      const std::string& extra_metadata) {
  const fs::path dir(directory);
  const double scale =
      thickness_from_delay(1.0, image.refractive_index, image.medium_index, image.convention);
  const int w = image.width_px, h = image.height_px;
  write_file((dir / "depth_m.csv").string(), matrix_csv(w, h, [&](CsvWriter& cw, int r, int c) {
               cw.add(image.at(r, c).estimate.depth_m);
             }));
  write_file((dir / "sigma_m.csv").string(), matrix_csv(w, h, [&](CsvWriter& cw, int r, int c) {
               cw.add(image.at(r, c).estimate.sigma_s * scale);
             }));
  write_file((dir / "fringe_index.csv").string(), matrix_csv(w, h, [&](CsvWriter& cw, int r, int c) {
               const auto& p = image.at(r, c);
               if (p.status == PixelStatus::ok)
                 cw.add(static_cast<long long>(p.estimate.fringe_index));
               else
                 cw.add(std::string("nan"));
             }));
  write_file((dir / "status.csv").string(), matrix_csv(w, h, [&](CsvWriter& cw, int r, int c) {
               cw.add(std::string(to_string(image.at(r, c).status)));
             }));
  write_file((dir / "depth.pgm").string(), depth_pgm(image));

  json meta = {{"width_px", w},
               {"height_px", h},
               {"detuning_hz", image.detuning_hz},
               {"dwell_s", image.dwell_s},
               {"seed", image.seed},
               {"convention", std::string(to_string(image.convention))},
               {"refractive_index", image.refractive_index},
               {"medium_index", image.medium_index},
               {"scan_order", image.scan_order},
               {"passes", image.passes},
               {"files",
                {{"depth", "depth_m.csv"},
                 {"sigma", "sigma_m.csv"},
                 {"fringe_index", "fringe_index.csv"},
                 {"status", "status.csv"},
                 {"preview", "depth.pgm"}}}};
  if (!extra_metadata.empty()) meta["config"] = json::parse(extra_metadata);
  write_file((dir / "image.json").string(), meta.dump(2) + "\n");
}

}  // namespace homscope
