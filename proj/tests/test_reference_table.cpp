#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <unistd.h>

#include "doctest.h"
#include "abc/error.hpp"
#include "abc/reference_table.hpp"

using namespace abc;

namespace {

ReferenceTable tiny() {
  ReferenceTable t({{1, "a", 0.5, {}}, {2, "b", 0.5, {{"x", 0, 1, Transform::logit}}}}, 2);
  t.append(1, {}, std::vector<double>{0, 0});
  t.append(2, std::vector<double>{0.3}, std::vector<double>{1, 0});
  t.append(2, std::vector<double>{0.6}, std::vector<double>{0, 2});
  t.append(1, {}, std::vector<double>{3, 4});
  return t;
}

std::filesystem::path temp_file(const char* tag) {
  return std::filesystem::temp_directory_path() / (std::string("abc-test-") + tag + std::to_string(::getpid()));
}

}  // namespace

TEST_CASE("weighted Euclidean distance") {
  DistanceScale s{{2.0, 0.5}};
  const std::vector<double> a{1, 1}, b{3, 2};
  // sqrt((2/2)^2 + (1/0.5)^2)
  CHECK(distance(a, b, s) == doctest::Approx(std::sqrt(5.0)));
  CHECK(distance(a, a, s) == 0.0);
  const DistanceScale zero{{1.0, 0.0}}, short_scale{{1.0}};
  CHECK_THROWS_AS(zero.validate(2), InvalidArgument);
  CHECK_THROWS_AS(short_scale.validate(2), InvalidArgument);
}

TEST_CASE("rows, spans and counts") {
  const ReferenceTable t = tiny();
  CHECK(t.size() == 4);
  CHECK(t.theta(0).empty());
  CHECK(t.theta(2)[0] == 0.6);
  CHECK(t.summary(3)[1] == 4);
  CHECK(t.per_model_counts() == std::vector<std::size_t>{2, 2});
  ReferenceTable u = tiny();
  CHECK_THROWS_AS(u.append(3, {}, std::vector<double>{0, 0}), InvalidArgument);
  CHECK_THROWS_AS(u.append(2, {}, std::vector<double>{0, 0}), InvalidArgument);
  CHECK_THROWS_AS(u.append(1, {}, std::vector<double>{0}), InvalidArgument);
}

TEST_CASE("scale is the sample standard deviation") {
  ReferenceTable t = tiny();
  const DistanceScale s = estimate_scale(t);
  // column 0: {0,1,0,3}, mean 1, ss = 1+0+1+4 = 6, var = 2
  CHECK(s.v[0] == doctest::Approx(std::sqrt(2.0)));
  // column 1: {0,0,2,4}, mean 1.5, ss = 2.25+2.25+0.25+6.25 = 11, var = 11/3
  CHECK(s.v[1] == doctest::Approx(std::sqrt(11.0 / 3)));
  ReferenceTable flat({{1, "a", 1.0, {}}}, 1);
  flat.append(1, {}, std::vector<double>{2});
  flat.append(1, {}, std::vector<double>{2});
  CHECK_THROWS_WITH_AS(estimate_scale(flat), doctest::Contains("s_1"), InvalidArgument);
}

TEST_CASE("nearest breaks ties by row index") {
  const std::vector<double> d{0.5, 0.1, 0.5, 0.0, 0.1};
  CHECK(nearest(d, 3) == std::vector<std::size_t>{3, 1, 4});
  CHECK(nearest(d, 5) == std::vector<std::size_t>{3, 1, 4, 0, 2});
  CHECK_THROWS_AS(nearest(d, 6), InvalidArgument);
}

TEST_CASE("build_table is reproducible and thread independent") {
  const ModelSet m = benchmark_model_set(30);
  const ReferenceTable a = build_table(m, 500, Allocation::equal, 3, 1);
  const ReferenceTable b = build_table(m, 500, Allocation::equal, 3, 4);
  CHECK(a == b);
  CHECK(table_checksum(a) == table_checksum(b));
  CHECK(a.per_model_counts() == std::vector<std::size_t>{250, 250});
  CHECK(a.has_scale());
  CHECK(a.provenance()["seed"] == 3);
  const ReferenceTable c = build_table(m, 500, Allocation::equal, 4, 1);
  CHECK(table_checksum(a) != table_checksum(c));
  const ReferenceTable p = build_table(m, 2000, Allocation::proportional, 3, 1);
  CHECK(p.per_model_counts()[0] > 900);
  CHECK(p.per_model_counts()[0] < 1100);
}

TEST_CASE("distances_to matches the pairwise formula") {
  const ReferenceTable t = build_table(benchmark_model_set(20), 300, Allocation::equal, 8, 1);
  const auto target = t.summary(17);
  const std::vector<double> d = distances_to(t, target, 3);
  for (std::size_t i = 0; i < t.size(); i += 37) CHECK(d[i] == distance(t.summary(i), target, t.scale()));
  CHECK(d[17] == 0.0);
}

TEST_CASE("save and load round trip") {
  ReferenceTable t = build_table(benchmark_model_set(20), 100, Allocation::equal, 11, 1);
  const auto path = temp_file("rt");
  save_table(t, path);
  const ReferenceTable back = load_table(path);
  CHECK(back == t);
  CHECK(table_checksum(back) == table_checksum(t));
  std::filesystem::remove(path);
}

TEST_CASE("corruption is detected") {
  const ReferenceTable t = build_table(benchmark_model_set(20), 50, Allocation::equal, 12, 1);
  const auto path = temp_file("bad");
  save_table(t, path);
  const auto size = std::filesystem::file_size(path);

  SUBCASE("flipped payload byte") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size - 5));
    f.put('\x7f');
  }
  SUBCASE("truncated") { std::filesystem::resize_file(path, size - 8); }
  SUBCASE("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS_AS(load_table(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_table(path), Error);
}

TEST_CASE("csv export") {
  const auto path = temp_file("csv");
  export_csv(tiny(), path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "model,theta_1,s_1,s_2");
  CHECK(row.rfind("1,", 0) == 0);
  std::filesystem::remove(path);
}
