#pragma once

// Feature tensors, label vectors, and their on-disk formats (NPY v1.0 and
// headerless CSV).

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace aled {

/// Element type a tensor was read from. Values are always held as double;
/// the source type is remembered so a store after load reproduces the file.
enum class Dtype { kF4, kF8, kI8 };

/// m x p pooled features, one sample per row.
class FeatureMatrix {
 public:
  /// Throws kShape if m < 1 or p < 1, kData if any entry is non-finite.
  explicit FeatureMatrix(Eigen::MatrixXd data, Dtype source = Dtype::kF8);

  Eigen::Index samples() const { return data_.rows(); }
  Eigen::Index dim() const { return data_.cols(); }
  const Eigen::MatrixXd& data() const { return data_; }
  Dtype source_dtype() const { return source_; }

 private:
  Eigen::MatrixXd data_;
  Dtype source_;
};

/// m x N x W x W stack of spatial feature maps, C row-major.
class FeatureMapStack {
 public:
  FeatureMapStack(std::size_t samples, std::size_t channels, std::size_t spatial,
                  std::vector<double> values, Dtype source = Dtype::kF8);

  std::size_t samples() const { return samples_; }
  std::size_t channels() const { return channels_; }
  std::size_t spatial() const { return spatial_; }
  Dtype source_dtype() const { return source_; }
  std::span<const double> values() const { return values_; }

  double at(std::size_t sample, std::size_t channel, std::size_t row,
            std::size_t col) const {
    return values_[((sample * channels_ + channel) * spatial_ + row) * spatial_ + col];
  }

 private:
  std::size_t samples_;
  std::size_t channels_;
  std::size_t spatial_;
  std::vector<double> values_;
  Dtype source_;
};

/// Binary labels. Holds at least one entry, each 0 or 1.
class LabelVector {
 public:
  /// Throws kData if empty, kLabel if a value is outside {0,1}.
  explicit LabelVector(std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<int>& values() const { return labels_; }
  std::size_t count(int label) const;

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<int> labels_;
};

using FeatureTensor = std::variant<FeatureMatrix, FeatureMapStack>;

/// Loads an NPY (sniffed by magic) or CSV file. Rank 2 yields a
/// FeatureMatrix, rank 4 a FeatureMapStack; anything else is kShape.
FeatureTensor load_feature_file(const std::filesystem::path& path);

/// Writes NPY v1.0 using the tensor's source dtype, byte-compatible with
/// numpy's own writer.
void store_feature_file(const FeatureTensor& tensor, const std::filesystem::path& path);

/// One integer per line, or a rank-1 integer NPY file.
LabelVector load_labels(const std::filesystem::path& path);

/// Writes "<i8" NPY when the extension is .npy, CSV otherwise.
void store_labels(const LabelVector& labels, const std::filesystem::path& path);

/// Spatial mean of every W x W map: m x N x W x W -> m x N.
FeatureMatrix average_pool(const FeatureMapStack& maps);

/// Pools rank-4 input, passes rank-2 input through.
FeatureMatrix as_feature_matrix(const FeatureTensor& tensor);

namespace npy {

struct Array {
  Dtype dtype = Dtype::kF8;
  std::vector<std::size_t> shape;
  std::vector<double> values;  // row-major, widened to double
};

Array read(const std::filesystem::path& path);
void write(const Array& array, const std::filesystem::path& path);

/// The header block (magic through trailing newline) numpy would emit.
std::string header_for(Dtype dtype, std::span<const std::size_t> shape);

}  // namespace npy

}  // namespace aled
