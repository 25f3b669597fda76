#include "aled/tensor_io.hpp"

#include "aled/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

namespace aled {

static_assert(std::endian::native == std::endian::little,
              "NPY I/O assumes a little-endian host");

namespace {

constexpr std::string_view kMagic = "\x93NUMPY";
constexpr std::size_t kArrayAlign = 64;
constexpr std::size_t kGrowthAxisMaxDigits = 21;

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

bool has_npy_magic(std::string_view bytes) { return bytes.substr(0, kMagic.size()) == kMagic; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::kF4 ? 4 : 8; }

std::string_view dtype_descr(Dtype dtype) {
  switch (dtype) {
    case Dtype::kF4: return "<f4";
    case Dtype::kF8: return "<f8";
    case Dtype::kI8: return "<i8";
  }
  return "<f8";
}

// Value following `'key':` in a Python dict literal, up to the next
// top-level comma or closing brace.
std::string_view dict_value(std::string_view dict, std::string_view key) {
  const std::string quoted = "'" + std::string(key) + "'";
  auto pos = dict.find(quoted);
  if (pos == std::string_view::npos) {
    throw Error(ErrorKind::kFormat, "NPY header lacks key " + quoted);
  }
  pos = dict.find(':', pos + quoted.size());
  if (pos == std::string_view::npos) throw Error(ErrorKind::kFormat, "NPY header malformed");
  std::string_view rest = trim(dict.substr(pos + 1));
  int depth = 0;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    const char c = rest[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth == 0 && (c == ',' || c == '}')) return trim(rest.substr(0, i));
  }
  throw Error(ErrorKind::kFormat, "NPY header malformed");
}

std::vector<std::size_t> parse_shape(std::string_view text) {
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw Error(ErrorKind::kFormat, "NPY shape is not a tuple");
  }
  std::vector<std::size_t> shape;
  std::string_view body = text.substr(1, text.size() - 2);
  while (!body.empty()) {
    const auto comma = body.find(',');
    const std::string_view item = trim(body.substr(0, comma));
    if (!item.empty()) {
      std::size_t v = 0;
      const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || ptr != item.data() + item.size()) {
        throw Error(ErrorKind::kFormat, "NPY shape entry is not an integer");
      }
      shape.push_back(v);
    }
    if (comma == std::string_view::npos) break;
    body.remove_prefix(comma + 1);
  }
  return shape;
}

std::string shape_repr(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  if (shape.size() == 1) out += ",";
  return out + ")";
}

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_finite(std::span<const double> values, const std::filesystem::path& path) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite value in " + path.string());
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    if (!line.empty()) lines.push_back(line);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

double parse_double(std::string_view field) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorKind::kFormat, "not a number: '" + std::string(field) + "'");
  }
  return v;
}

FeatureMatrix read_csv_matrix(std::string_view text, const std::filesystem::path& path) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw Error(ErrorKind::kData, "empty feature file " + path.string());
  std::vector<std::vector<double>> rows;
  for (std::string_view line : lines) {
    std::vector<double> row;
    while (true) {
      const auto comma = line.find(',');
      row.push_back(parse_double(line.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorKind::kFormat, "ragged CSV rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!std::isfinite(v)) throw Error(ErrorKind::kData, "non-finite value in " + path.string());
      data(i, j) = v;
    }
  }
  return FeatureMatrix(std::move(data), Dtype::kF8);
}

}  // namespace

FeatureMatrix::FeatureMatrix(Eigen::MatrixXd data, Dtype source)
    : data_(std::move(data)), source_(source) {
  if (data_.rows() < 1 || data_.cols() < 1) {
    throw Error(ErrorKind::kShape, "feature matrix needs at least 1 sample and 1 column");
  }
  if (!data_.allFinite()) throw Error(ErrorKind::kData, "feature matrix has non-finite entries");
}

FeatureMapStack::FeatureMapStack(std::size_t samples, std::size_t channels, std::size_t spatial,
                                 std::vector<double> values, Dtype source)
    : samples_(samples), channels_(channels), spatial_(spatial), values_(std::move(values)),
      source_(source) {
  if (samples_ < 1 || channels_ < 1 || spatial_ < 1) {
    throw Error(ErrorKind::kShape, "feature map stack dimensions must be positive");
  }
  if (values_.size() != samples_ * channels_ * spatial_ * spatial_) {
    throw Error(ErrorKind::kShape, "feature map stack size does not match m*N*W*W");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kData, "feature maps have non-finite entries");
  }
}

LabelVector::LabelVector(std::vector<int> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error(ErrorKind::kData, "label vector is empty");
  for (int v : labels_) {
    if (v != 0 && v != 1) {
      throw Error(ErrorKind::kLabel, "label " + std::to_string(v) + " is not 0 or 1");
    }
  }
}

std::size_t LabelVector::count(int label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

namespace npy {

std::string header_for(Dtype dtype, std::span<const std::size_t> shape) {
  std::string dict = "{'descr': '" + std::string(dtype_descr(dtype)) +
                     "', 'fortran_order': False, 'shape': " + shape_repr(shape) + ", }";
  if (!shape.empty()) {
    dict.append(kGrowthAxisMaxDigits - std::to_string(shape.front()).size(), ' ');
  }
  const std::size_t hlen = dict.size() + 1;
  const std::size_t prefix = kMagic.size() + 2 + 2;
  const std::size_t padlen = kArrayAlign - ((prefix + hlen) % kArrayAlign);
  const std::size_t total = hlen + padlen;

  std::string out(kMagic);
  out += '\x01';
  out += '\x00';
  out += static_cast<char>(total & 0xff);
  out += static_cast<char>((total >> 8) & 0xff);
  out += dict;
  out.append(padlen, ' ');
  out += '\n';
  return out;
}

Array read(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (!has_npy_magic(bytes) || bytes.size() < 10) {
    throw Error(ErrorKind::kFormat, path.string() + " is not an NPY file");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) |
                 (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw Error(ErrorKind::kFormat, "truncated NPY header");
    for (int b = 0; b < 4; ++b) {
      header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + b])) << (8 * b);
    }
    offset = 12;
  } else {
    throw Error(ErrorKind::kFormat, "unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw Error(ErrorKind::kFormat, "truncated NPY header");
  const std::string_view dict(bytes.data() + offset, header_len);

  Array array;
  const std::string_view descr = dict_value(dict, "descr");
  if (descr == "'<f4'") {
    array.dtype = Dtype::kF4;
  } else if (descr == "'<f8'") {
    array.dtype = Dtype::kF8;
  } else if (descr == "'<i8'") {
    array.dtype = Dtype::kI8;
  } else {
    throw Error(ErrorKind::kFormat, "unsupported NPY dtype " + std::string(descr));
  }
  if (dict_value(dict, "fortran_order") != "False") {
    throw Error(ErrorKind::kFormat, "Fortran-ordered NPY arrays are not supported");
  }
  array.shape = parse_shape(dict_value(dict, "shape"));

  const std::size_t count = element_count(array.shape);
  const std::size_t width = dtype_size(array.dtype);
  const std::size_t data_offset = offset + header_len;
  if (bytes.size() != data_offset + count * width) {
    throw Error(ErrorKind::kFormat, "NPY payload size does not match its shape");
  }
  array.values.resize(count);
  const char* src = bytes.data() + data_offset;
  for (std::size_t i = 0; i < count; ++i, src += width) {
    switch (array.dtype) {
      case Dtype::kF4: {
        float f;
        std::memcpy(&f, src, 4);
        array.values[i] = f;
        break;
      }
      case Dtype::kF8:
        std::memcpy(&array.values[i], src, 8);
        break;
      case Dtype::kI8: {
        std::int64_t v;
        std::memcpy(&v, src, 8);
        array.values[i] = static_cast<double>(v);
        break;
      }
    }
  }
  return array;
}

void write(const Array& array, const std::filesystem::path& path) {
  if (element_count(array.shape) != array.values.size()) {
    throw Error(ErrorKind::kShape, "NPY array size does not match its shape");
  }
  std::string bytes = header_for(array.dtype, array.shape);
  const std::size_t width = dtype_size(array.dtype);
  const std::size_t start = bytes.size();
  bytes.resize(start + width * array.values.size());
  char* dst = bytes.data() + start;
  for (double v : array.values) {
    switch (array.dtype) {
      case Dtype::kF4: {
        const auto f = static_cast<float>(v);
        std::memcpy(dst, &f, 4);
        break;
      }
      case Dtype::kF8:
        std::memcpy(dst, &v, 8);
        break;
      case Dtype::kI8: {
        const auto i = static_cast<std::int64_t>(v);
        std::memcpy(dst, &i, 8);
        break;
      }
    }
    dst += width;
  }
  write_all(path, bytes);
}

}  // namespace npy

FeatureTensor load_feature_file(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  if (!has_npy_magic(bytes)) return read_csv_matrix(bytes, path);

  npy::Array array = npy::read(path);
  if (array.dtype == Dtype::kI8) {
    throw Error(ErrorKind::kFormat, "feature files must be <f4 or <f8");
  }
  require_finite(array.values, path);
  if (array.shape.size() == 2) {
    const auto rows = static_cast<Eigen::Index>(array.shape[0]);
    const auto cols = static_cast<Eigen::Index>(array.shape[1]);
    Eigen::MatrixXd data(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        data(i, j) = array.values[static_cast<std::size_t>(i * cols + j)];
      }
    }
    return FeatureMatrix(std::move(data), array.dtype);
  }
  if (array.shape.size() == 4) {
    if (array.shape[2] != array.shape[3]) {
      throw Error(ErrorKind::kShape, "feature maps must be square (W x W)");
    }
    return FeatureMapStack(array.shape[0], array.shape[1], array.shape[2],
                           std::move(array.values), array.dtype);
  }
  throw Error(ErrorKind::kShape,
              "feature tensors must have rank 2 or 4, got rank " + std::to_string(array.shape.size()));
}

void store_feature_file(const FeatureTensor& tensor, const std::filesystem::path& path) {
  npy::Array array;
  if (const auto* matrix = std::get_if<FeatureMatrix>(&tensor)) {
    const auto& data = matrix->data();
    array.dtype = matrix->source_dtype();
    array.shape = {static_cast<std::size_t>(data.rows()), static_cast<std::size_t>(data.cols())};
    array.values.reserve(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      for (Eigen::Index j = 0; j < data.cols(); ++j) array.values.push_back(data(i, j));
    }
  } else {
    const auto& maps = std::get<FeatureMapStack>(tensor);
    array.dtype = maps.source_dtype();
    array.shape = {maps.samples(), maps.channels(), maps.spatial(), maps.spatial()};
    array.values.assign(maps.values().begin(), maps.values().end());
  }
  npy::write(array, path);
}

LabelVector load_labels(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  std::vector<int> labels;
  if (has_npy_magic(bytes)) {
    const npy::Array array = npy::read(path);
    if (array.dtype != Dtype::kI8) throw Error(ErrorKind::kFormat, "label files must be <i8");
    if (array.shape.size() != 1) throw Error(ErrorKind::kShape, "label tensors must be rank 1");
    if (array.values.empty()) throw Error(ErrorKind::kData, "empty label file " + path.string());
    for (double v : array.values) labels.push_back(static_cast<int>(v));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<double>(labels[i]) != array.values[i]) {
        throw Error(ErrorKind::kLabel, "label value out of range");
      }
    }
    return LabelVector(std::move(labels));
  }

  const auto lines = split_lines(bytes);
  if (lines.empty()) throw Error(ErrorKind::kData, "empty label file " + path.string());
  for (std::string_view line : lines) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec == std::errc::result_out_of_range) throw Error(ErrorKind::kLabel, "label value out of range");
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw Error(ErrorKind::kFormat, "label '" + std::string(line) + "' is not an integer");
    }
    if (v != 0 && v != 1) throw Error(ErrorKind::kLabel, "label " + std::to_string(v) + " is not 0 or 1");
    labels.push_back(static_cast<int>(v));
  }
  return LabelVector(std::move(labels));
}

void store_labels(const LabelVector& labels, const std::filesystem::path& path) {
  if (path.extension() == ".npy") {
    npy::Array array;
    array.dtype = Dtype::kI8;
    array.shape = {labels.size()};
    array.values.assign(labels.values().begin(), labels.values().end());
    npy::write(array, path);
    return;
  }
  std::string text;
  for (int v : labels.values()) {
    text += std::to_string(v);
    text += '\n';
  }
  write_all(path, text);
}

FeatureMatrix average_pool(const FeatureMapStack& maps) {
  const std::size_t area = maps.spatial() * maps.spatial();
  Eigen::MatrixXd pooled(static_cast<Eigen::Index>(maps.samples()),
                         static_cast<Eigen::Index>(maps.channels()));
  const auto values = maps.values();
  for (std::size_t i = 0; i < maps.samples(); ++i) {
    for (std::size_t c = 0; c < maps.channels(); ++c) {
      const auto block = values.subspan((i * maps.channels() + c) * area, area);
      double sum = 0.0;
      for (double v : block) sum += v;
      pooled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          sum / static_cast<double>(area);
    }
  }
  return FeatureMatrix(std::move(pooled), Dtype::kF8);
}

FeatureMatrix as_feature_matrix(const FeatureTensor& tensor) {
  if (const auto* matrix = std::get_if<FeatureMatrix>(&tensor)) return *matrix;
  return average_pool(std::get<FeatureMapStack>(tensor));
}

}  // namespace aled
