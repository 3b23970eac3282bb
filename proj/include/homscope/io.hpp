#pragma once

// Byte-stable file formats: CSV tables and matrices, sample maps with a JSON
// sidecar, depth-image exports and a 16-bit graymap preview.

#include <string>
#include <vector>

#include "homscope/scene.hpp"

namespace homscope {

/// 17 significant digits, locale-independent; NaN as "nan", infinities as "inf"/"-inf".
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& add(double v);
  CsvWriter& add(long long v);
  CsvWriter& add(unsigned long long v);
  CsvWriter& add(const std::string& s);
  void end_row();
  const std::string& text() const { return text_; }
  void save(const std::string& path) const;

 private:
  std::string text_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

/// Writes bytes to a file, creating parent directories. Throws Error(io).
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

/// Height matrix in metres with a "c0,c1,..." header; sidecar <stem>.json holds
/// pitch, refractive index and substrate delay.
void save_sample_map(const SampleMap& map, const std::string& csv_path);
SampleMap load_sample_map(const std::string& csv_path);
std::string sidecar_path(const std::string& csv_path);

/// Writes depth_m.csv, sigma_m.csv, fringe_index.csv, status.csv, depth.pgm and
/// image.json into the directory. The JSON embeds extra_metadata (a JSON object) when given.
void save_depth_image(const DepthImage& image, const std::string& directory,
                      const std::string& extra_metadata = {});

/// Binary 16-bit PGM of the depth estimates; failed pixels are 0.
std::string depth_pgm(const DepthImage& image);

}  // namespace homscope
