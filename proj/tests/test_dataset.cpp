#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "semplan/dataset.hpp"
#include "semplan/simulator.hpp"
#include "test_util.hpp"

using namespace semplan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("semplan_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("16-bit PGM round trip") {
  const fs::path dir = scratch("pgm");
  Image16 img(7, 5);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = std::uint16_t(i * 1237 % 65536);
  write_pgm16(img, (dir / "a.pgm").string());
  const Image16 back = read_pgm16((dir / "a.pgm").string());
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.data == img.data);

  // 8-bit files are accepted too.
  {
    std::ofstream f(dir / "b.pgm", std::ios::binary);
    f << "P5\n# note\n2 1\n255\n";
    f.put(char(3));
    f.put(char(200));
  }
  const Image16 small = read_pgm16((dir / "b.pgm").string());
  CHECK(small.data == std::vector<std::uint16_t>{3, 200});

  {
    std::ofstream f(dir / "c.pgm", std::ios::binary);
    f << "P2\n1 1\n255\n0\n";
  }
  CHECK(test::error_code([&] { read_pgm16((dir / "c.pgm").string()); }) == ErrorCode::kIo);
  CHECK(test::error_code([&] { read_pgm16((dir / "missing.pgm").string()); }) == ErrorCode::kIo);
}

TEST_CASE("probability file layout") {
  const fs::path dir = scratch("prob");
  const ProbabilityMap m(2, 1, 3, {0.2, 0.3, 0.5, 1.0, 0.0, 0.0});
  write_probability_file(m, (dir / "m.prob").string());
  CHECK(fs::file_size(dir / "m.prob") == 12 + 6 * 4);

  // Header then class-fastest little-endian floats.
  std::ifstream in(dir / "m.prob", std::ios::binary);
  unsigned char hdr[12];
  in.read(reinterpret_cast<char*>(hdr), 12);
  CHECK(hdr[0] == 2);
  CHECK(hdr[4] == 1);
  CHECK(hdr[8] == 3);
  float first = 0;
  in.read(reinterpret_cast<char*>(&first), 4);
  CHECK(first == doctest::Approx(0.2).epsilon(1e-6));

  const ProbabilityMap back = read_probability_file((dir / "m.prob").string());
  CHECK(back.width() == 2);
  CHECK(back.numClasses() == 3);
  for (std::size_t i = 0; i < m.values().size(); ++i) CHECK(std::abs(back.values()[i] - m.values()[i]) < 1e-6);
}

TEST_CASE("descriptor hex") {
  Descriptor d;
  d[255] = true;
  d[0] = true;
  d[4] = true;
  const std::string hex = descriptor_to_hex(d);
  CHECK(hex.size() == 64);
  CHECK(hex.front() == '8');
  CHECK(hex.back() == '1');
  CHECK(hex[62] == '1');
  CHECK(descriptor_from_hex(hex) == d);
  std::mt19937_64 rng(91);
  for (int i = 0; i < 100; ++i) {
    Descriptor r;
    for (int b = 0; b < 256; ++b) r[b] = rng() & 1u;
    CHECK(descriptor_from_hex(descriptor_to_hex(r)) == r);
  }
  CHECK(test::error_code([] { descriptor_from_hex("abc"); }) == ErrorCode::kIo);
  CHECK(test::error_code([] { descriptor_from_hex(std::string(64, 'g')); }) == ErrorCode::kIo);
}

TEST_CASE("dataset directory round trip") {
  SceneSpec spec = default_indoor_scene();
  spec.trajectory.frame_count = 4;
  const auto b = generate_scene(spec, 3);
  const Dataset ds = to_dataset(b, perturb_initialization(b, 0.005, 0.25, 0.01, 3));
  const fs::path dir = scratch("dataset");
  write_dataset(ds, dir.string());
  const Dataset back = read_dataset(dir.string());

  CHECK(back.class_names == ds.class_names);
  CHECK(back.intrinsics.fx == ds.intrinsics.fx);
  CHECK(back.label_confidence == ds.label_confidence);
  REQUIRE(back.frames.size() == ds.frames.size());
  for (std::size_t f = 0; f < ds.frames.size(); ++f) {
    const auto& a = ds.frames[f];
    const auto& c = back.frames[f];
    CHECK(c.index == a.index);
    CHECK(c.timestamp == doctest::Approx(a.timestamp).epsilon(1e-12));
    CHECK(test::max_abs_diff(c.initial_pose.matrix(), a.initial_pose.matrix()) < 1e-8);
    CHECK(c.labels.data == a.labels.data);
    CHECK(c.instances.data == a.instances.data);
    REQUIRE(c.observations.size() == a.observations.size());
    for (std::size_t i = 0; i < a.observations.size(); ++i) {
      CHECK(c.observations[i].track == a.observations[i].track);
      CHECK(c.observations[i].pixel == a.observations[i].pixel);
    }
  }
  REQUIRE(back.points.size() == ds.points.size());
  for (const auto& [id, p] : ds.points) {
    CHECK(back.points.at(id).initial_position == p.initial_position);
    CHECK(back.points.at(id).descriptor == p.descriptor);
  }
  REQUIRE(back.truth.has_value());
  CHECK(back.truth->point_object == ds.truth->point_object);
  REQUIRE(back.truth->object_planes.size() == ds.truth->object_planes.size());
  REQUIRE(back.ground_truth.has_value());
  CHECK(back.ground_truth->size() == ds.ground_truth->size());

  fs::remove(dir / "points.csv");
  CHECK(test::error_code([&] { read_dataset(dir.string()); }) == ErrorCode::kIo);
}
