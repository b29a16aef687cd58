#include "nftm/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nftm {

namespace {

using json = nlohmann::json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ValueRange resolve_range(std::span<const double> v, std::optional<ValueRange> range) {
  if (range) {
    if (!(range->hi > range->lo) || !std::isfinite(range->lo) || !std::isfinite(range->hi)) {
      throw std::invalid_argument("image range must satisfy lo < hi, got [" + fmt_double(range->lo) + ", " +
                                  fmt_double(range->hi) + "]");
    }
    return *range;
  }
  auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  return {*mn, *mx};
}

std::uint8_t quantize(double v, ValueRange r) {
  if (r.hi == r.lo) return 0;
  const double q = std::round(255.0 * (v - r.lo) / (r.hi - r.lo));
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

void write_pnm(const std::filesystem::path& path, const char* magic, std::size_t w, std::size_t h, ValueRange r,
               const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << magic << "\n# range " << fmt_double(r.lo) << ' ' << fmt_double(r.hi) << "\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

json to_json(const MetricRecord& rec) {
  json j = json::object();
  for (const auto& [k, v] : rec) {
    if (const double* d = std::get_if<double>(&v)) {
      if (!std::isfinite(*d)) throw std::invalid_argument("metric '" + k + "' is not finite");
      j[k] = *d;
    } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
      j[k] = *i;
    } else {
      j[k] = std::get<std::string>(v);
    }
  }
  return j;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Tensor& image, std::optional<ValueRange> range) {
  const bool ok = image.rank() == 2 || (image.rank() == 3 && image.dim(0) == 1);
  if (!ok || image.numel() == 0) throw std::invalid_argument("write_pgm needs [H, W], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  auto v = image.values();
  const ValueRange r = resolve_range(v, range);
  std::vector<std::uint8_t> payload(v.size());
  std::transform(v.begin(), v.end(), payload.begin(), [&](double x) { return quantize(x, r); });
  write_pnm(path, "P5", w, h, r, payload);
}

void write_ppm(const std::filesystem::path& path, const Tensor& image, std::optional<ValueRange> range) {
  if (image.rank() != 3 || image.dim(0) != 3 || image.numel() == 0) {
    throw std::invalid_argument("write_ppm needs [3, H, W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2), cells = h * w;
  auto v = image.values();
  const ValueRange r = resolve_range(v, range);
  std::vector<std::uint8_t> payload(v.size());
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t c = 0; c < 3; ++c) payload[3 * i + c] = quantize(v[c * cells + i], r);
  }
  write_pnm(path, "P6", w, h, r, payload);
}

Tensor PnmImage::dequantize() const {
  if (!range) throw std::invalid_argument("image has no range comment");
  const double scale = (range->hi - range->lo) / 255.0;
  const std::size_t cells = width * height;
  std::vector<double> v(bytes.size());
  for (std::size_t i = 0; i < cells; ++i) {
    for (std::size_t c = 0; c < channels; ++c) v[c * cells + i] = range->lo + scale * bytes[i * channels + c];
  }
  if (channels == 1) return Tensor({height, width}, std::move(v));
  return Tensor({channels, height, width}, std::move(v));
}

PnmImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  PnmImage img;
  std::string magic;
  in >> magic;
  if (magic == "P5") {
    img.channels = 1;
  } else if (magic == "P6") {
    img.channels = 3;
  } else {
    throw std::runtime_error(path.string() + ": not a binary PGM/PPM");
  }
  std::size_t fields[3];
  for (auto& f : fields) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      std::istringstream ls(line);
      std::string hash, key;
      double lo = 0.0, hi = 0.0;
      if (ls >> hash >> key >> lo >> hi && key == "range") img.range = ValueRange{lo, hi};
      in >> std::ws;
    }
    if (!(in >> f)) throw std::runtime_error(path.string() + ": malformed header");
  }
  img.width = fields[0];
  img.height = fields[1];
  if (fields[2] != 255) throw std::runtime_error(path.string() + ": only maxval 255 is supported");
  in.get();
  img.bytes.resize(img.width * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.bytes.size())) {
    throw std::runtime_error(path.string() + ": truncated payload");
  }
  return img;
}

std::vector<CifarRecord> load_cifar10(const std::filesystem::path& path, std::size_t max_records) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw std::runtime_error("cannot read " + path.string() + ": " + ec.message());
  if (size % kCifarRecordBytes != 0) {
    const auto expected = (size / kCifarRecordBytes + 1) * kCifarRecordBytes;
    throw std::runtime_error(path.string() + ": size " + std::to_string(size) +
                             " is not a multiple of 3073 (expected " + std::to_string(expected) +
                             " bytes for the next whole record)");
  }
  std::size_t n = size / kCifarRecordBytes;
  if (max_records != 0) n = std::min(n, max_records);
  std::ifstream in(path, std::ios::binary);
  std::vector<CifarRecord> out;
  out.reserve(n);
  std::vector<std::uint8_t> buf(kCifarRecordBytes);
  for (std::size_t r = 0; r < n; ++r) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error(path.string() + ": read failed at record " + std::to_string(r));
    if (buf[0] > 9) {
      throw std::runtime_error(path.string() + ": record " + std::to_string(r) + " has label " +
                               std::to_string(buf[0]) + " (> 9)");
    }
    std::vector<double> px(3072);
    for (std::size_t i = 0; i < 3072; ++i) px[i] = buf[1 + i] / 127.5 - 1.0;
    out.push_back({buf[0], Tensor({3, 32, 32}, std::move(px))});
  }
  return out;
}

std::string metric_line(const MetricRecord& record) { return to_json(record).dump(); }

void write_metrics(const std::vector<MetricRecord>& records, const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) text += metric_line(r) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::vector<MetricRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<MetricRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    MetricRecord rec;
    for (auto& [k, v] : j.items()) {
      if (v.is_number_integer()) {
        rec[k] = v.get<std::int64_t>();
      } else if (v.is_number()) {
        rec[k] = v.get<double>();
      } else if (v.is_string()) {
        rec[k] = v.get<std::string>();
      } else {
        throw std::runtime_error(path.string() + ": metric '" + k + "' is not a number or string");
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path, std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open " + path.string() + " for appending");
}

void MetricsWriter::write(const MetricRecord& record) {
  out_ << metric_line(record) << '\n';
  out_.flush();
}

void ensure_directory(const std::filesystem::path& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create " + path.string() + ": " + ec.message());
}

}  // namespace nftm
