#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nftm/tensor.hpp"

namespace nftm {

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

// 8-bit quantisation: round(255 (v - lo) / (hi - lo)), clamped. Without an
// explicit range the data min/max is used. The range goes into a
// "# range <lo> <hi>" header comment.
void write_pgm(const std::filesystem::path& path, const Tensor& image, std::optional<ValueRange> range = {});
void write_ppm(const std::filesystem::path& path, const Tensor& image, std::optional<ValueRange> range = {});

struct PnmImage {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> bytes;  // interleaved for P6
  std::optional<ValueRange> range;

  // Back to values, [H, W] for P5 and channel-planar [3, H, W] for P6.
  // Needs the range comment.
  Tensor dequantize() const;
};
PnmImage read_pnm(const std::filesystem::path& path);

struct CifarRecord {
  std::uint8_t label = 0;
  Tensor image;  // [3, 32, 32] in [-1, 1]
};
inline constexpr std::size_t kCifarRecordBytes = 3073;
// Reads up to max_records (0 = all) records.
std::vector<CifarRecord> load_cifar10(const std::filesystem::path& path, std::size_t max_records = 0);

using MetricValue = std::variant<double, std::int64_t, std::string>;
using MetricRecord = std::map<std::string, MetricValue>;

// One JSON object per line, keys sorted. Non-finite numbers are rejected.
std::string metric_line(const MetricRecord& record);
void write_metrics(const std::vector<MetricRecord>& records, const std::filesystem::path& path);
std::vector<MetricRecord> read_metrics(const std::filesystem::path& path);

// Appends and flushes one line per record.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricRecord& record);

 private:
  std::ofstream out_;
};

// Creates `path` and its parents.
void ensure_directory(const std::filesystem::path& path);

}  // namespace nftm
