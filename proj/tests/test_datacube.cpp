#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lscm/datacube.hpp"
#include "lscm/errors.hpp"

using namespace lscm;

namespace {

const char* kComplete =
    "loc_id,s1,s2,t,y,x1\n"
    "a,0.0,0.0,1,1.5,0\n"
    "a,0.0,0.0,2,2.5,1\n"
    "a,0.0,0.0,3,3.5,0\n"
    "b,1.0,0.0,1,-1.0,1\n"
    "b,1.0,0.0,2,0.25,1\n"
    "b,1.0,0.0,3,7.0,0\n";

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

DataCube grid_cube(std::size_t n1, std::size_t n2, std::size_t m) {
  std::vector<Location> locs;
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      locs.push_back({"g" + std::to_string(i) + "_" + std::to_string(j), 2.0 + 0.5 * static_cast<double>(i),
                      -1.0 + 0.5 * static_cast<double>(j)});
    }
  }
  const std::size_t n = locs.size();
  Field y(n, m);
  Field x(n, m);
  Field w(n, m);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t t = 0; t < m; ++t) {
      y.set(l, t, static_cast<double>(100 * l + t));
      x.set(l, t, static_cast<double>((l + t) % 2));
      if ((l + t) % 3 != 0) w.set(l, t, 0.1 * static_cast<double>(l) - static_cast<double>(t));
    }
  }
  return DataCube(std::move(locs), m, std::move(y), {std::move(x)}, {std::move(w)}, {}, 2000);
}

}  // namespace

TEST_CASE("complete rectangular file") {
  const DataCube cube = parse_cube(kComplete);
  CHECK(cube.n() == 2);
  CHECK(cube.m() == 3);
  CHECK(cube.d() == 1);
  CHECK(cube.p() == 0);
  CHECK(cube.response().observed_count() == 6);
  CHECK(cube.treatment().observed_count() == 6);
  CHECK(cube.location(1).id == "b");
  CHECK(cube.response().value(1, 1) == 0.25);
  CHECK(cube.time_origin() == 1);
}

TEST_CASE("deleting a row yields exactly one missing cell") {
  auto lines = lines_of(kComplete);
  lines.erase(lines.begin() + 5);  // b, t=2
  const DataCube cube = parse_cube(join(lines));
  CHECK(cube.n() == 2);
  CHECK(cube.m() == 3);
  CHECK(cube.response().observed_count() == 5);
  CHECK(cube.treatment().observed_count() == 5);
  CHECK_FALSE(cube.response().observed(1, 1));
  CHECK_FALSE(cube.response().get(1, 1).has_value());
  CHECK(cube.response().value(0, 1) == 2.5);
}

TEST_CASE("gap in the time index names the missing step") {
  const std::string text =
      "loc_id,s1,s2,t,y,x1\n"
      "a,0,0,1,1.0,0\n"
      "a,0,0,2,1.0,0\n"
      "a,0,0,4,1.0,0\n";
  try {
    (void)parse_cube(text);
    FAIL("expected an integrity error");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find("gap at t=3") != std::string::npos);
  }
}

TEST_CASE("duplicate (id, t) rows are an integrity error") {
  std::string text = kComplete;
  text += "a,0.0,0.0,2,9.0,1\n";
  CHECK_THROWS_AS((void)parse_cube(text), IntegrityError);
}

TEST_CASE("malformed rows report their line number") {
  SUBCASE("bad real") {
    std::string text = kComplete;
    text += "c,2.0,0.0,1,abc,0\n";
    try {
      (void)parse_cube(text);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 8);
    }
  }
  SUBCASE("wrong field count") {
    auto lines = lines_of(kComplete);
    lines[3] = "a,0.0,0.0,3,3.5";
    try {
      (void)parse_cube(join(lines));
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 4);
    }
  }
  SUBCASE("decimal comma is not a real") {
    auto lines = lines_of(kComplete);
    lines[1] = "a,0.0,0.0,1,\"1,5\",0";
    CHECK_THROWS_AS((void)parse_cube(join(lines)), ParseError);
  }
}

TEST_CASE("missing required column") {
  CHECK_THROWS_AS((void)parse_cube("loc_id,s1,s2,y,x1\na,0,0,1,1\n"), ParseError);
}

TEST_CASE("empty fields and NA are missing values") {
  const std::string text =
      "loc_id,s1,s2,t,y,x1,w1\n"
      "a,0,0,1,,1,NA\n"
      "a,0,0,2,2.0,0,3.5\n";
  const DataCube cube = parse_cube(text);
  CHECK_FALSE(cube.response().observed(0, 0));
  CHECK(cube.treatment().observed(0, 0));
  CHECK_FALSE(cube.covariate().observed(0, 0));
  CHECK(cube.covariate().value(0, 1) == 3.5);
}

TEST_CASE("inconsistent coordinates for one id") {
  std::string text = kComplete;
  text += "a,5.0,0.0,4,1.0,0\n";
  CHECK_THROWS_AS((void)parse_cube(text), IntegrityError);
}

TEST_CASE("custom delimiter and explicit column mapping") {
  const std::string text =
      "id;east;north;year;loss;conflict;road\n"
      "p;0.5;1.5;2001;0.1;1;3.0\n"
      "p;0.5;1.5;2002;0.2;0;3.0\n";
  CubeSchema schema;
  schema.loc_id = "id";
  schema.s1 = "east";
  schema.s2 = "north";
  schema.t = "year";
  schema.response = "loss";
  schema.treatments = {"conflict"};
  schema.covariates = {"road"};
  schema.delimiter = ';';
  const DataCube cube = parse_cube(text, schema);
  CHECK(cube.m() == 2);
  CHECK(cube.time_origin() == 2001);
  CHECK(cube.names().covariates == std::vector<std::string>{"road"});
  CHECK(cube.covariate_index("road") == 0);
  CHECK_THROWS_AS((void)cube.covariate_index("nope"), ConfigError);
}

TEST_CASE("read_cube is insensitive to row order") {
  const DataCube reference = parse_cube(kComplete);
  auto lines = lines_of(kComplete);
  std::mt19937 gen(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(lines.begin() + 1, lines.end(), gen);
    CHECK(parse_cube(join(lines)) == reference);
  }
}

TEST_CASE("write_cube then read_cube reproduces the cube") {
  const DataCube cube = grid_cube(3, 2, 4);
  const auto path = std::filesystem::temp_directory_path() / "lscm_test_roundtrip.csv";
  write_cube(cube, path);
  CHECK(read_cube(path) == cube);
  std::filesystem::remove(path);

  CHECK(parse_cube(format_cube(cube, '\t'), CubeSchema{.delimiter = '\t'}) == cube);
}

TEST_CASE("read_cube on a missing file is an I/O error") {
  CHECK_THROWS_AS((void)read_cube("/nonexistent/dir/cube.csv"), IoError);
}

TEST_CASE("DataCube invariants") {
  Field y(1, 2);
  Field x(1, 2);
  CHECK_THROWS_AS(DataCube({{"a", 0, 0}, {"a", 1, 0}}, 2, Field(2, 2), {Field(2, 2)}), IntegrityError);
  CHECK_THROWS_AS(DataCube({{"a", 0, 0}}, 2, Field(1, 3), {x}), IntegrityError);
  CHECK_THROWS_AS(DataCube({{"a", std::nan(""), 0}}, 2, y, {x}), IntegrityError);
  CHECK_THROWS_AS(DataCube({{"a", 0, 0}}, 2, y, {}), IntegrityError);
}

TEST_CASE("sorted_order follows location ids") {
  Field f(3, 1);
  const DataCube cube({{"c", 0, 0}, {"a", 1, 0}, {"b", 2, 0}}, 1, f, {f});
  CHECK(cube.sorted_order() == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("lattice detection") {
  const DataCube cube = grid_cube(3, 4, 1);
  const auto lat = detect_lattice(cube.locations());
  REQUIRE(lat.has_value());
  CHECK(lat->n1 == 3);
  CHECK(lat->n2 == 4);
  CHECK(lat->complete());
  CHECK(lat->spacing1 == doctest::Approx(0.5));

  const std::vector<Location> scattered{{"a", 0.0, 0.0}, {"b", 1.0, 0.3}, {"c", 0.7, 2.0}};
  CHECK_FALSE(detect_lattice(scattered).has_value());
}

TEST_CASE("transpose of a line grid swaps the axes") {
  // 5 x 1 spatial grid, m = 4.
  const DataCube cube = grid_cube(5, 1, 4);
  const DataCube t = transpose_axes(cube);
  CHECK(t.n() == 4);
  CHECK(t.m() == 5);
  for (std::size_t loc = 0; loc < 5; ++loc) {
    for (std::size_t step = 0; step < 4; ++step) {
      CHECK(t.response().value(step, loc) == cube.response().value(loc, step));
      CHECK(t.treatment().value(step, loc) == cube.treatment().value(loc, step));
      CHECK(t.covariate().observed(step, loc) == cube.covariate().observed(loc, step));
    }
  }
  CHECK(t.location(2).s1 == 2002.0);
}

TEST_CASE("transpose is an involution") {
  for (auto [n1, n2, m] : {std::tuple{5, 1, 4}, std::tuple{3, 4, 6}, std::tuple{2, 2, 1}}) {
    const DataCube cube = grid_cube(n1, n2, m);
    const DataCube back = transpose_axes(transpose_axes(cube));
    CHECK(back == cube);
    CHECK(back.swap_record() == nullptr);
    CHECK(format_cube(back) == format_cube(cube));
  }
}

TEST_CASE("transpose rejects irregular layouts") {
  Field f(3, 2);
  const DataCube scattered({{"a", 0.0, 0.0}, {"b", 1.0, 0.3}, {"c", 0.7, 2.0}}, 2, f, {f});
  CHECK_THROWS_AS((void)transpose_axes(scattered), UnsupportedLayoutError);

  // On a lattice but with a hole.
  const DataCube holed({{"a", 0.0, 0.0}, {"b", 1.0, 0.0}, {"c", 0.0, 1.0}}, 2, f, {f});
  CHECK_THROWS_AS((void)transpose_axes(holed), UnsupportedLayoutError);
}
