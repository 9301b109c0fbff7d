#include "doctest.h"

#include <sstream>

#include "helpers.hpp"
#include "protoest/datastore.hpp"
#include "protoest/rng.hpp"
#include "protoest/world.hpp"

using namespace protoest;

namespace {

EmbeddingDataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_embeddings(in);
}

ErrorKind kind_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a parse failure");
  return ErrorKind::InvalidArgument;
}

EmbeddingDataset from_rows(const std::vector<std::string>& labels, const Matrix& rows) {
  return EmbeddingDataset{labels, rows};
}

// Unbalanced 5-class Gaussian dataset with class sizes 3, 10, 25, 7, 60.
EmbeddingDataset unbalanced_dataset(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const std::vector<int> sizes{3, 10, 25, 7, 60};
  const GaussianWorld world(Vector::Zero(4), testutil::random_psd(gen, 4, 3.0), testutil::random_psd(gen, 4));
  const auto classes = sample_classes(world, sizes.size(), StreamKey(seed));
  EmbeddingDataset ds;
  int total = 0;
  for (int s : sizes) total += s;
  ds.vectors.resize(total, 4);
  Eigen::Index r = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (const auto& p : sample_points(classes[c], world, sizes[c], StreamKey(seed + 1))) {
      ds.vectors.row(r++) = p.transpose();
      ds.labels.push_back("c" + std::to_string(c));
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("load_embeddings parses labels and vectors") {
  const auto ds = parse("a,1.0,2.0\na,1.0,2.0\nb,0,0");
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.distinct_labels() == std::vector<std::string>{"a", "b"});
  CHECK(ds.vectors(0, 1) == 2.0);
  // CRLF and trailing blank lines are tolerated.
  CHECK(parse("x,1\r\ny,2\r\n\n").size() == 2);
}

TEST_CASE("load_embeddings error paths") {
  CHECK(kind_of("") == ErrorKind::ParseError);
  CHECK(kind_of("a,1,NaN\n") == ErrorKind::NonFiniteValue);
  CHECK(kind_of("a,1,inf\n") == ErrorKind::NonFiniteValue);
  CHECK(kind_of("a,1,2\nb,1\n") == ErrorKind::RaggedRows);
  CHECK(kind_of("a,1,x\n") == ErrorKind::ParseError);
  CHECK(kind_of("a\n") == ErrorKind::ParseError);
  try {
    parse("a,1\nb,2\nc,zz\n");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("row 3") != std::string::npos);
    CHECK(what.find("column 2") != std::string::npos);
  }
  try {
    load_embeddings("/nonexistent/embeddings.csv");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
  }
}

TEST_CASE("class_stats examples") {
  Matrix rows(3, 1);
  rows << 0, 2, 5;
  const auto stats = class_stats(from_rows({"x", "x", "y"}, rows));
  REQUIRE(stats.classes.size() == 2);
  CHECK(stats.classes[0].label == "x");
  CHECK(stats.classes[0].mean(0) == 1.0);
  CHECK(stats.classes[0].cov(0, 0) == 1.0);
  CHECK(stats.classes[1].count == 1);
  CHECK(stats.classes[1].mean(0) == 5.0);
  CHECK(stats.classes[1].cov(0, 0) == 0.0);
}

TEST_CASE("class_stats equals the covariance op on the same subset") {
  const auto ds = unbalanced_dataset(3);
  const auto stats = class_stats(ds);
  const auto groups = ds.rows_by_label();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    const Matrix members = ds.vectors(groups[c], Eigen::all);
    CHECK(stats.classes[c].cov == covariance(members));
  }
}

TEST_CASE("moment_summary examples") {
  SUBCASE("two classes at 0 and 2 with no spread") {
    Matrix rows(4, 1);
    rows << 0, 0, 2, 2;
    const auto s = moment_summary(class_stats(from_rows({"a", "a", "b", "b"}, rows)));
    CHECK(s.between_cov(0, 0) == doctest::Approx(1.0));
    CHECK(s.within_cov(0, 0) == 0.0);
    CHECK(s.class_count == 2);
  }
  SUBCASE("class-size weighting equals equal-class on balanced data") {
    std::mt19937_64 gen(4);
    const Matrix rows = testutil::random_matrix(gen, 12, 3);
    std::vector<std::string> labels;
    for (int i = 0; i < 12; ++i) labels.push_back("k" + std::to_string(i % 4));
    const auto stats = class_stats(from_rows(labels, rows));
    const auto eq = moment_summary(stats, Weighting::EqualClass);
    const auto cs = moment_summary(stats, Weighting::ClassSize);
    CHECK((eq.between_cov - cs.between_cov).norm() < 1e-15);
    CHECK((eq.within_cov - cs.within_cov).norm() < 1e-15);
  }
  SUBCASE("identical classes: between-class trace vanishes relative to within") {
    const GaussianWorld world(Vector::Zero(3), Matrix::Zero(3, 3), Matrix::Identity(3, 3));
    const auto classes = sample_classes(world, 20, StreamKey(8));
    EmbeddingDataset ds;
    ds.vectors.resize(20 * 1000, 3);
    Eigen::Index r = 0;
    for (const auto& c : classes) {
      for (const auto& p : sample_points(c, world, 1000, StreamKey(9))) {
        ds.vectors.row(r++) = p.transpose();
        ds.labels.push_back("c" + std::to_string(c.id));
      }
    }
    const auto s = moment_summary(class_stats(ds));
    // Sample-mean noise alone gives a ratio near (C-1)/(C L) = 9.5e-4; this seed gives 1.2e-3.
    CHECK(s.between_cov.trace() / s.within_cov.trace() < 3e-3);
  }
  SUBCASE("single class is rejected") {
    Matrix rows(2, 1);
    rows << 0, 1;
    try {
      moment_summary(class_stats(from_rows({"a", "a"}, rows)));
      FAIL("expected SingleClass");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SingleClass);
    }
  }
}

TEST_CASE("law of total variance holds exactly under class-size weighting") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto s = moment_summary(class_stats(unbalanced_dataset(seed)), Weighting::ClassSize);
    const double total = s.total_cov.trace();
    CHECK(std::abs(total - s.within_cov.trace() - s.between_cov.trace()) <= 1e-9 * total);
  }
}

TEST_CASE("variance_ratio examples") {
  MomentSummary s;
  s.between_cov = Matrix::Identity(1, 1);
  s.within_cov = Matrix::Identity(1, 1);
  CHECK(variance_ratio(s) == 1.0);

  s.between_cov = Matrix::Zero(2, 2);
  s.between_cov(0, 0) = 2.0;
  s.within_cov = 0.5 * Matrix::Identity(2, 2);
  CHECK(variance_ratio(s) == 2.0);

  s.within_cov = Matrix::Zero(2, 2);
  try {
    variance_ratio(s);
    FAIL("expected DegenerateIntraClassVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateIntraClassVariance);
  }
  CHECK(std::isinf(variance_ratio(s, true)));
}

TEST_CASE("variance_ratio is rotation invariant") {
  std::mt19937_64 gen(12);
  for (std::uint64_t seed : {7u, 8u, 9u}) {
    auto ds = unbalanced_dataset(seed);
    const double before = variance_ratio(moment_summary(class_stats(ds)));
    const Matrix q = testutil::random_orthogonal(gen, ds.dim());
    ds.vectors = ds.vectors * q.transpose();
    const double after = variance_ratio(moment_summary(class_stats(ds)));
    CHECK(std::abs(after - before) <= 1e-9 * before);
  }
}

TEST_CASE("intrinsic_dimension examples") {
  auto spectrum = [](std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
  };
  CHECK(intrinsic_dimension_from_spectrum(spectrum({1, 1, 1, 0, 0}), 0.9) == 3);
  CHECK(intrinsic_dimension_from_spectrum(spectrum({9, 0.5, 0.5}), 0.9) == 1);
  for (Eigen::Index e : {1, 5, 10, 64}) {
    CHECK(intrinsic_dimension(Matrix::Identity(e, e), 0.9) ==
          static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(e) - 1e-9)));
  }
  // Negative noise eigenvalues are clamped before ratios.
  CHECK(intrinsic_dimension_from_spectrum(spectrum({2, 0, -1e-12}), 1.0) == 1);
  try {
    intrinsic_dimension(Matrix::Zero(3, 3));
    FAIL("expected ZeroTotalVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroTotalVariance);
  }
}

TEST_CASE("intrinsic_dimension of exact-rank data at threshold 1.0 is the rank") {
  std::mt19937_64 gen(14);
  for (int rank = 1; rank <= 5; ++rank) {
    const Matrix rows = testutil::random_matrix(gen, 300, rank) * testutil::random_matrix(gen, rank, 9);
    CHECK(intrinsic_dimension(covariance(rows), 1.0) == static_cast<std::size_t>(rank));
  }
}

TEST_CASE("intrinsic_dimension is monotone in the threshold") {
  std::mt19937_64 gen(15);
  for (int draw = 0; draw < 20; ++draw) {
    const Matrix cov = testutil::random_psd(gen, 8);
    std::size_t previous = 0;
    for (double t = 0.05; t <= 1.0 + 1e-12; t += 0.05) {
      const std::size_t d = intrinsic_dimension(cov, std::min(t, 1.0));
      CHECK(d >= previous);
      previous = d;
    }
  }
}
