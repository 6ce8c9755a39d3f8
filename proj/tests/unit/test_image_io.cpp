#include <doctest.h>

#include <fstream>

#include "gddm/assets.hpp"
#include "gddm/error.hpp"
#include "gddm/image_io.hpp"
#include "helpers.hpp"

using namespace gddm;

TEST_SUITE("image_io") {
  TEST_CASE("PGM round trip at 8-bit precision") {
    const auto dir = test::scratch_dir("image_io_pgm");
    Field img(Shape{3, 5, 1});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / 14.0;
    write_pnm(dir / "a.pgm", img);
    const Field back = read_pnm(dir / "a.pgm");
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);
  }

  TEST_CASE("PPM keeps three channels") {
    const auto dir = test::scratch_dir("image_io_ppm");
    const Field img = new_field(2, 2, 3, 1.0);
    write_pnm(dir / "a.ppm", img);
    const Field back = read_pnm(dir / "a.ppm");
    CHECK(back.shape() == img.shape());
    CHECK(back == img);
  }

  TEST_CASE("header comments are skipped") {
    const auto dir = test::scratch_dir("image_io_comment");
    {
      std::ofstream out(dir / "c.pgm", std::ios::binary);
      out << "P5\n# comment\n2 1\n# another\n255\n";
      out.put(static_cast<char>(0));
      out.put(static_cast<char>(255));
    }
    const Field f = read_pnm(dir / "c.pgm");
    CHECK(f(0, 0) == 0.0);
    CHECK(f(0, 1) == 1.0);
  }

  TEST_CASE("malformed and missing files raise") {
    const auto dir = test::scratch_dir("image_io_bad");
    {
      std::ofstream out(dir / "bad.pgm", std::ios::binary);
      out << "P5\n4 4\n255\n";
      out.put(1);
    }
    CHECK_THROWS_AS(read_pnm(dir / "bad.pgm"), IoError);
    CHECK_THROWS_AS(read_pnm(dir / "missing.pgm"), IoError);
  }

  TEST_CASE("raw fields round trip exactly") {
    const auto dir = test::scratch_dir("image_io_raw");
    const Field x = test::random_field(7, 5, 4, 2);
    write_raw_field(dir / "x.gdlf", x);
    CHECK(read_raw_field(dir / "x.gdlf") == x);
  }

  TEST_CASE("display normalization maps to the unit range") {
    const Field x = test::random_field(8, 8, 1, 3, 5.0);
    const auto st = field_stats(normalize_for_display(x));
    CHECK(st.min == doctest::Approx(0.0));
    CHECK(st.max == doctest::Approx(1.0));
  }

  TEST_CASE("bundled image is a 256x256 grayscale PGM") {
    const Field img = read_pnm(bundled_image_path());
    CHECK(img.shape() == Shape{256, 256, 1});
    const auto st = field_stats(img);
    CHECK(st.min >= 0.0);
    CHECK(st.max <= 1.0);
    CHECK(st.variance > 0.01);
  }
}
