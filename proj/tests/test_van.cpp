#include <doctest.h>

#include <random>

#include "ivan/van.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace ivan;

namespace {

IOTable<double> no_intermediates_table() {
  // Z = 0, VA = T, each node's demand entirely from its own country
  IOTable<double> table;
  table.year = 1990;
  table.countries = {"A", "B", "C"};
  table.sectors = {"x"};
  table.intermediate = Matrix<double>::Zero(3, 3);
  table.final_demand = Matrix<double>::Zero(3, 3);
  table.final_demand(0, 0) = 11.0;
  table.final_demand(1, 1) = 5.0;
  table.final_demand(2, 2) = 8.0;
  table.total_output = table.final_demand.rowwise().sum();
  table.value_added = table.total_output;
  return table;
}

}  // namespace

TEST_SUITE("van") {

TEST_CASE("zero intermediates give the identity Leontief inverse") {
  const auto sys = build_leontief(no_intermediates_table());
  CHECK(sys.coefficients.isZero(0.0));
  CHECK(sys.inverse.isApprox(Matrix<double>::Identity(3, 3), 1e-14));
  CHECK(sys.value_added_share.isApprox(Vector<double>::Ones(3), 1e-14));
}

TEST_CASE("2x2 inverse matches the power-series oracle") {
  IOTable<double> table;
  table.year = 1;
  table.countries = {"A"};
  table.sectors = {"x", "y"};
  // A = [[0.2, 0.3], [0.1, 0.4]] via T = (10, 10)
  table.total_output = Vector<double>::Constant(2, 10.0);
  table.intermediate.resize(2, 2);
  table.intermediate << 2, 3, 1, 4;
  table.final_demand.resize(2, 1);
  table.final_demand << 5, 5;
  table.value_added.resize(2);
  table.value_added << 7, 3;

  const auto sys = build_leontief(table);
  const Matrix<double> series = oracle::leontief_series(sys.coefficients, 1e-14);
  CHECK((sys.inverse - series).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("toy table inverse matches the series oracle to 1e-10") {
  const auto sys = build_leontief(testutil::load_toy6());
  const Matrix<double> series = oracle::leontief_series(sys.coefficients, 1e-14);
  CHECK((sys.inverse - series).cwiseAbs().maxCoeff() < 1e-10);
  // L (I - A) = I
  const Matrix<double> eye =
      sys.inverse * (Matrix<double>::Identity(6, 6) - sys.coefficients);
  CHECK((eye - Matrix<double>::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sys.spectral_radius < 1.0);
  CHECK(sys.spectral_radius > 0.3);  // toy columns spend ~0.42..0.5 on inputs
}

TEST_CASE("inactive sectors (T = 0) produce zero coefficients, not NaN") {
  auto table = no_intermediates_table();
  table.final_demand(1, 1) = 0.0;
  table.total_output(1) = 0.0;
  table.value_added(1) = 0.0;
  const auto sys = build_leontief(table);
  CHECK(sys.coefficients.col(1).isZero(0.0));
  CHECK(sys.value_added_share(1) == 0.0);
  CHECK(sys.final_demand(1) == 0.0);
}

TEST_CASE("spectral radius at or above one is rejected with an estimate") {
  IOTable<double> table;
  table.year = 1;
  table.countries = {"A"};
  table.sectors = {"x"};
  table.total_output = Vector<double>::Constant(1, 10.0);
  table.intermediate = Matrix<double>::Constant(1, 1, 10.0);  // A = 1
  table.final_demand = Matrix<double>::Zero(1, 1);
  table.value_added = Vector<double>::Zero(1);
  CHECK_THROWS_WITH_AS(build_leontief(table), doctest::Contains("spectral radius"),
                       std::runtime_error);
}

TEST_CASE("negative value-added shares are clamped and counted") {
  IOTable<double> table = no_intermediates_table();
  table.value_added(2) = -3.0;
  const auto sys = build_leontief(table);
  CHECK(sys.clamped_shares == 1);
  CHECK(sys.value_added_share(2) == 0.0);
}

TEST_CASE("gvan with zero value added is all zeros") {
  auto table = no_intermediates_table();
  table.value_added.setZero();
  const auto gvan = build_gvan(build_leontief(table));
  CHECK(gvan.weights.isZero(0.0));
  CHECK(gvan.kind == NetworkKind::gvan);
}

TEST_CASE("no intermediates means own demand induces everything: G = diag(T)") {
  const auto table = no_intermediates_table();
  const auto gvan = build_gvan(build_leontief(table));
  Matrix<double> expected = Matrix<double>::Zero(3, 3);
  expected(0, 0) = 11.0;
  expected(1, 1) = 5.0;
  expected(2, 2) = 8.0;
  CHECK(gvan.weights.isApprox(expected, 1e-14));
}

TEST_CASE("toy gvan equals the ripple-effect series oracle") {
  const auto table = testutil::load_toy6();
  const auto sys = build_leontief(table);
  const auto gvan = build_gvan(sys);
  const Matrix<double> series = oracle::leontief_series(sys.coefficients, 1e-15);
  const Matrix<double> expected =
      sys.value_added_share.asDiagonal() * series * sys.final_demand.asDiagonal();
  CHECK((gvan.weights - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("balanced table: gvan column sums equal total final demand") {
  const auto table = testutil::load_toy6();
  const auto sys = build_leontief(table);
  const auto gvan = build_gvan(sys);
  const Vector<double> column_sums = gvan.weights.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < column_sums.size(); ++j)
    CHECK(std::abs(column_sums(j) - sys.final_demand(j)) <=
          1e-8 * std::abs(sys.final_demand(j)));
}

TEST_CASE("gvan entries are non-negative and clamps are counted") {
  auto table = testutil::load_toy6();
  table.final_demand(5, 2) = -60.0;  // inventory drawdown makes F_5 negative
  table.total_output = table.intermediate.rowwise().sum() + table.final_demand.rowwise().sum();
  table.value_added = table.total_output - table.intermediate.colwise().sum().transpose();
  for (Eigen::Index i = 0; i < 6; ++i)
    if (table.value_added(i) < 0) table.value_added(i) = 0;  // keep shares sane
  GvanStats stats;
  const auto gvan = build_gvan(build_leontief(table), &stats);
  CHECK(stats.clamped_negative > 0);
  CHECK(gvan.weights.minCoeff() >= 0.0);
}

TEST_CASE("ivan zeroes exactly the within-country blocks") {
  const auto table = testutil::load_toy6();
  const auto gvan = build_gvan(build_leontief(table));
  const auto ivan = build_ivan(gvan, table.sector_count());
  CHECK(ivan.kind == NetworkKind::ivan);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      const bool domestic = ivan.nodes[i].country == ivan.nodes[j].country;
      if (domestic)
        CHECK(ivan.weights(i, j) == 0.0);
      else
        CHECK(ivan.weights(i, j) == gvan.weights(i, j));
    }
  // total flow splits into domestic + international
  double domestic_sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (gvan.nodes[i].country == gvan.nodes[j].country) domestic_sum += gvan.weights(i, j);
  CHECK(ivan.weights.sum() == doctest::Approx(gvan.weights.sum() - domestic_sum).epsilon(1e-12));
}

TEST_CASE("ivan of a block-diagonal gvan is empty; build_ivan is idempotent") {
  const auto gvan = build_gvan(build_leontief(no_intermediates_table()));
  const auto ivan = build_ivan(gvan, 1);
  CHECK(ivan.weights.isZero(0.0));
  const auto toy_gvan = build_gvan(build_leontief(testutil::load_toy6()));
  const auto once = build_ivan(toy_gvan, 2);
  const auto twice = build_ivan(once, 2);
  CHECK(once.weights == twice.weights);
}

TEST_CASE("ivan rejects node counts not divisible by the sector count") {
  const auto gvan = build_gvan(build_leontief(testutil::load_toy6()));
  CHECK_THROWS_WITH_AS(build_ivan(gvan, 4), doctest::Contains("not divisible"),
                       std::invalid_argument);
}

TEST_CASE("threshold keeps exactly k heaviest links") {
  const auto table = testutil::load_toy6();
  const auto ivan = build_ivan(build_gvan(build_leontief(table)), 2);
  const std::size_t nonzero = ivan.link_count();
  CHECK(nonzero == 24);  // all cross-country cells are active on the toy table

  SUBCASE("k equal to the link count is a no-op") {
    const auto cut = threshold_top_k(ivan, nonzero);
    CHECK(cut.weights == ivan.weights);
  }
  SUBCASE("k = 1 keeps the single heaviest link") {
    const auto cut = threshold_top_k(ivan, 1);
    CHECK(cut.link_count() == 1);
    Eigen::Index max_row = 0, max_col = 0;
    ivan.weights.maxCoeff(&max_row, &max_col);
    CHECK(cut.weights(max_row, max_col) == ivan.weights(max_row, max_col));
  }
  SUBCASE("k beyond the link count keeps everything and reports truncation") {
    ThresholdInfo info;
    const auto cut = threshold_top_k(ivan, nonzero + 100, &info);
    CHECK(cut.weights == ivan.weights);
    CHECK(info.truncated);
    CHECK(info.retained == nonzero);
  }
  SUBCASE("retained links are nested as k grows") {
    for (std::size_t k = 1; k + 1 < nonzero; k += 3) {
      const auto small = threshold_top_k(ivan, k);
      const auto large = threshold_top_k(ivan, k + 1);
      for (Eigen::Index i = 0; i < 6; ++i)
        for (Eigen::Index j = 0; j < 6; ++j)
          if (small.weights(i, j) > 0.0) CHECK(large.weights(i, j) == small.weights(i, j));
    }
  }
}

TEST_CASE("threshold ties break deterministically by (source, target)") {
  auto net = testutil::network_from_edges(
      4, {{0, 1, 5.0}, {1, 2, 5.0}, {2, 3, 5.0}, {3, 0, 5.0}});
  const auto cut = threshold_top_k(net, 2);
  CHECK(cut.weights(0, 1) == 5.0);
  CHECK(cut.weights(1, 2) == 5.0);
  CHECK(cut.weights(2, 3) == 0.0);
  CHECK(cut.weights(3, 0) == 0.0);
}

TEST_CASE("float instantiation stays usable") {
  IOTable<float> table;
  table.year = 1;
  table.countries = {"A"};
  table.sectors = {"x"};
  table.total_output = Vector<float>::Constant(1, 4.0f);
  table.intermediate = Matrix<float>::Constant(1, 1, 1.0f);
  table.final_demand = Matrix<float>::Constant(1, 1, 3.0f);
  table.value_added = Vector<float>::Constant(1, 3.0f);
  const auto sys = build_leontief(table);
  CHECK(sys.inverse(0, 0) == doctest::Approx(4.0f / 3.0f));
}

}  // TEST_SUITE
