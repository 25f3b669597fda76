#include "aled/error.hpp"
#include "aled/tensor_io.hpp"

#include "doctest.h"
#include "testing.hpp"

#include <fstream>
#include <iterator>

using namespace aled;
using aled::testing::TempDir;
using aled::testing::data_path;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected aled::Error");
  return ErrorKind::kFormat;
}

FeatureMapStack random_stack(Rng& rng, std::size_t m, std::size_t n, std::size_t w) {
  std::vector<double> values(m * n * w * w);
  for (double& v : values) v = testing::uniform(rng, -5.0, 5.0);
  return FeatureMapStack(m, n, w, std::move(values));
}

}  // namespace

TEST_CASE("2x3 f8 file loads bit-exact") {
  const FeatureTensor t = load_feature_file(data_path("matrix_2x3_f8.npy"));
  const auto& mat = std::get<FeatureMatrix>(t);
  REQUIRE(mat.samples() == 2);
  REQUIRE(mat.dim() == 3);
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK(mat.data() == expected);
  CHECK(mat.source_dtype() == Dtype::kF8);
}

TEST_CASE("f4 values widen exactly") {
  const auto mat = std::get<FeatureMatrix>(load_feature_file(data_path("matrix_2x3_f4.npy")));
  CHECK(mat.source_dtype() == Dtype::kF4);
  CHECK(mat.data()(0, 0) == 1.5);
  CHECK(mat.data()(1, 2) == -6.25);
}

TEST_CASE("store after load is bit-identical to numpy's file") {
  TempDir dir("rt");
  for (const char* name : {"matrix_2x3_f8.npy", "matrix_2x3_f4.npy", "stack_2x3x2x2_f4.npy"}) {
    CAPTURE(name);
    const FeatureTensor t = load_feature_file(data_path(name));
    store_feature_file(t, dir / name);
    CHECK(slurp(dir / name) == slurp(data_path(name)));
  }
}

TEST_CASE("header matches numpy layout") {
  const std::vector<std::size_t> shape{2, 3};
  const std::string header = npy::header_for(Dtype::kF8, shape);
  CHECK(header.size() == 128);
  CHECK(header.back() == '\n');
  CHECK(header == slurp(data_path("matrix_2x3_f8.npy")).substr(0, 128));
}

TEST_CASE("random matrices round-trip through store and load") {
  Rng rng(11);
  TempDir dir("rand");
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = testing::uniform_int(rng, 2, 40);
    const Eigen::Index p = testing::uniform_int(rng, 1, 12);
    const FeatureMatrix original(testing::normal_matrix(rng, m, p));
    store_feature_file(original, dir / "x.npy");
    const auto back = std::get<FeatureMatrix>(load_feature_file(dir / "x.npy"));
    CHECK(back.data() == original.data());
  }
}

TEST_CASE("rank-4 file becomes a map stack") {
  const auto stack = std::get<FeatureMapStack>(load_feature_file(data_path("stack_2x3x2x2_f4.npy")));
  CHECK(stack.samples() == 2);
  CHECK(stack.channels() == 3);
  CHECK(stack.spatial() == 2);
  CHECK(stack.at(1, 2, 1, 1) == 23.0);
}

TEST_CASE("rank-3 tensor is a shape error") {
  CHECK(kind_of([] { load_feature_file(data_path("rank3_f8.npy")); }) == ErrorKind::kShape);
}

TEST_CASE("malformed headers are format errors") {
  TempDir dir("bad");
  std::string bytes = slurp(data_path("matrix_2x3_f8.npy"));
  SUBCASE("truncated payload") {
    spit(dir / "a.npy", bytes.substr(0, bytes.size() - 4));
    CHECK(kind_of([&] { load_feature_file(dir / "a.npy"); }) == ErrorKind::kFormat);
  }
  SUBCASE("big-endian descr") {
    bytes.replace(bytes.find("<f8"), 3, ">f8");
    spit(dir / "b.npy", bytes);
    CHECK(kind_of([&] { load_feature_file(dir / "b.npy"); }) == ErrorKind::kFormat);
  }
  SUBCASE("fortran order") {
    bytes.replace(bytes.find("False"), 5, "True ");
    spit(dir / "c.npy", bytes);
    CHECK(kind_of([&] { load_feature_file(dir / "c.npy"); }) == ErrorKind::kFormat);
  }
  SUBCASE("header cut short") {
    spit(dir / "d.npy", bytes.substr(0, 20));
    CHECK(kind_of([&] { load_feature_file(dir / "d.npy"); }) == ErrorKind::kFormat);
  }
}

TEST_CASE("non-finite entries are data errors") {
  TempDir dir("nan");
  spit(dir / "x.csv", "1,2\n3,nan\n");
  CHECK(kind_of([&] { load_feature_file(dir / "x.csv"); }) == ErrorKind::kData);

  npy::Array arr{Dtype::kF8, {2, 2}, {1.0, 2.0, std::numeric_limits<double>::infinity(), 4.0}};
  npy::write(arr, dir / "x.npy");
  CHECK(kind_of([&] { load_feature_file(dir / "x.npy"); }) == ErrorKind::kData);
}

TEST_CASE("csv matrices load") {
  TempDir dir("csv");
  spit(dir / "x.csv", "1,2.5,-3\n4e1,5,6\n");
  const auto mat = std::get<FeatureMatrix>(load_feature_file(dir / "x.csv"));
  Eigen::MatrixXd expected(2, 3);
  expected << 1, 2.5, -3, 40, 5, 6;
  CHECK(mat.data() == expected);
  spit(dir / "ragged.csv", "1,2\n3\n");
  CHECK(kind_of([&] { load_feature_file(dir / "ragged.csv"); }) == ErrorKind::kFormat);
}

TEST_CASE("labels from csv") {
  TempDir dir("lab");
  spit(dir / "ok.csv", "0\n1\n1");
  CHECK(load_labels(dir / "ok.csv").values() == std::vector<int>{0, 1, 1});
  spit(dir / "two.csv", "2\n");
  CHECK(kind_of([&] { load_labels(dir / "two.csv"); }) == ErrorKind::kLabel);
  spit(dir / "empty.csv", "");
  CHECK(kind_of([&] { load_labels(dir / "empty.csv"); }) == ErrorKind::kData);
  spit(dir / "frac.csv", "0\n0.5\n");
  CHECK(kind_of([&] { load_labels(dir / "frac.csv"); }) == ErrorKind::kFormat);
}

TEST_CASE("labels from npy and back") {
  TempDir dir("labnpy");
  const LabelVector labels = load_labels(data_path("labels_i8.npy"));
  CHECK(labels.values() == std::vector<int>{0, 1, 1, 0});
  store_labels(labels, dir / "l.npy");
  CHECK(slurp(dir / "l.npy") == slurp(data_path("labels_i8.npy")));
  store_labels(labels, dir / "l.csv");
  CHECK(load_labels(dir / "l.csv") == labels);
}

TEST_CASE("missing file is an io error") {
  CHECK(kind_of([] { load_feature_file("/nonexistent/x.npy"); }) == ErrorKind::kIo);
}

TEST_CASE("average_pool examples") {
  SUBCASE("constant map") {
    for (std::size_t w : {1u, 3u, 7u}) {
      const FeatureMapStack stack(2, 3, w, std::vector<double>(2 * 3 * w * w, 7.0));
      const FeatureMatrix pooled = average_pool(stack);
      CHECK((pooled.data().array() == 7.0).all());
    }
  }
  SUBCASE("single 2x2 map") {
    const FeatureMatrix pooled = average_pool(FeatureMapStack(1, 1, 2, {1, 2, 3, 4}));
    CHECK(pooled.data()(0, 0) == 2.5);
  }
  SUBCASE("shape") {
    const FeatureMatrix pooled = average_pool(FeatureMapStack(3, 5, 8, std::vector<double>(3 * 5 * 64, 1.0)));
    CHECK(pooled.samples() == 3);
    CHECK(pooled.dim() == 5);
  }
}

TEST_CASE("average_pool is linear and preserves counts") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = testing::uniform_int(rng, 2, 6);
    const std::size_t n = testing::uniform_int(rng, 1, 5);
    const std::size_t w = testing::uniform_int(rng, 1, 6);
    const FeatureMapStack x = random_stack(rng, m, n, w);
    const FeatureMapStack y = random_stack(rng, m, n, w);
    const double a = testing::uniform(rng, -3, 3);
    const double b = testing::uniform(rng, -3, 3);
    std::vector<double> combo(x.values().size());
    for (std::size_t i = 0; i < combo.size(); ++i) combo[i] = a * x.values()[i] + b * y.values()[i];

    const FeatureMatrix lhs = average_pool(FeatureMapStack(m, n, w, combo));
    const Eigen::MatrixXd rhs = a * average_pool(x).data() + b * average_pool(y).data();
    CHECK(lhs.samples() == static_cast<Eigen::Index>(m));
    CHECK(lhs.dim() == static_cast<Eigen::Index>(n));
    CHECK((lhs.data() - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("constructors validate") {
  CHECK(kind_of([] { FeatureMatrix(Eigen::MatrixXd::Zero(0, 3)); }) == ErrorKind::kShape);
  CHECK(kind_of([] { LabelVector(std::vector<int>{}); }) == ErrorKind::kData);
  CHECK(kind_of([] { LabelVector(std::vector<int>{0, -1}); }) == ErrorKind::kLabel);
  CHECK(kind_of([] { FeatureMapStack(2, 2, 2, std::vector<double>(3)); }) == ErrorKind::kShape);
}
