#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <random>

#include "activebasis/error.hpp"
#include "activebasis/image_ops.hpp"
#include "oracles.hpp"
#include "synth.hpp"

using namespace abm;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "activebasis_unit";
  fs::create_directories(dir);
  return dir / name;
}

void write_pnm(const fs::path& path, const char* magic, int w, int h, int channels, std::uint8_t value) {
  std::ofstream out(path, std::ios::binary);
  out << magic << "\n" << w << " " << h << "\n255\n";
  std::vector<char> data(static_cast<std::size_t>(w) * h * channels, static_cast<char>(value));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace

TEST(LoadGray, WhitePgmIsOne) {
  const auto p = temp_path("white.pgm");
  write_pnm(p, "P5", 9, 7, 1, 255);
  const GrayImage im = load_gray(p);
  ASSERT_EQ(im.width, 9);
  ASSERT_EQ(im.height, 7);
  for (double v : im.pixels) EXPECT_EQ(v, 1.0);
}

TEST(LoadGray, KeepsDimensions) {
  const auto p = temp_path("deer_sized.pgm");
  write_pnm(p, "P5", 122, 120, 1, 17);
  const GrayImage im = load_gray(p);
  EXPECT_EQ(im.width, 122);
  EXPECT_EQ(im.height, 120);
}

TEST(LoadGray, GrayRgbMapsThroughLuma) {
  const auto p = temp_path("gray.ppm");
  write_pnm(p, "P6", 5, 4, 3, 128);
  const GrayImage im = load_gray(p);
  for (double v : im.pixels) EXPECT_NEAR(v, 128.0 / 255.0, 1e-12);
  EXPECT_NEAR(im.pixels.front(), 0.502, 1e-3);
}

TEST(LoadGray, UnreadableFileThrowsWithPath) {
  const auto p = temp_path("corrupt.png");
  std::ofstream(p) << "not an image";
  try {
    load_gray(p);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("corrupt.png"), std::string::npos);
  }
  EXPECT_THROW(load_gray(temp_path("missing.png")), IoError);
}

TEST(Responses, ZeroImageGivesZero) {
  const Dictionary dict;
  const ResponseMaps r = compute_responses(GrayImage(30, 30), dict);
  for (double v : r.energy_data()) EXPECT_EQ(v, 0.0);
}

TEST(Responses, MarginIsHalfSupport) {
  const Dictionary dict;
  const ResponseMaps r = compute_responses(GrayImage(30, 25), dict);
  EXPECT_EQ(r.margin(), 8);
  EXPECT_EQ(r.valid(), (Rect{8, 8, 22, 17}));
  EXPECT_FALSE(r.is_valid(7, 10));
  EXPECT_TRUE(r.is_valid(8, 8));
  EXPECT_FALSE(r.is_valid(22, 10));
}

TEST(Responses, EmbeddedCosineProjectsToUnit) {
  const Dictionary dict;
  for (int o : {0, 4, 11}) {
    GrayImage im(40, 40);
    test::add_cosine(im, dict, 20, 19, o);
    const ResponseMaps r = compute_responses(im, dict);
    EXPECT_NEAR(r.cos_resp(o, 20, 19), 1.0, 1e-12);
    EXPECT_NEAR(r.sin_resp(o, 20, 19), 0.0, 1e-6);
    EXPECT_NEAR(r.energy(o, 20, 19), 1.0, 1e-6);
  }
}

TEST(Responses, MatchDenseOracleOnRandomImage) {
  const Dictionary dict;
  const GrayImage im = test::random_image(32, 32, 7);
  const ResponseMaps r = compute_responses(im, dict);
  const Rect v = r.valid();
  for (int o = 0; o < dict.orientations(); ++o) {
    for (int y = v.y0; y < v.y1; ++y) {
      for (int x = v.x0; x < v.x1; ++x) {
        const auto d = test::dense_response(im, dict, x, y, o);
        ASSERT_NEAR(r.cos_resp(o, x, y), d[0], 1e-8);
        ASSERT_NEAR(r.sin_resp(o, x, y), d[1], 1e-8);
        ASSERT_NEAR(r.energy(o, x, y), r.cos_resp(o, x, y) * r.cos_resp(o, x, y) +
                                           r.sin_resp(o, x, y) * r.sin_resp(o, x, y), 1e-12);
      }
    }
  }
}

TEST(Responses, ImageSmallerThanSupportThrows) {
  EXPECT_THROW(compute_responses(GrayImage(16, 40), Dictionary{}), SizeError);
}

TEST(Responses, PropertyLinearity) {
  const Dictionary dict = test::toy_dictionary();
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const GrayImage im = test::random_image(20, 18, rng());
    const ResponseMaps base = compute_responses(im, dict);
    for (double a : {-1.0, 0.5, 2.0}) {
      GrayImage scaled = im;
      for (double& v : scaled.pixels) v *= a;
      const ResponseMaps r = compute_responses(scaled, dict);
      for (std::size_t i = 0; i < r.cos_data().size(); ++i) {
        ASSERT_NEAR(r.cos_data()[i], a * base.cos_data()[i], 1e-10);
        ASSERT_NEAR(r.sin_data()[i], a * base.sin_data()[i], 1e-10);
      }
    }
  }
}

TEST(Responses, PropertyTranslationEquivariance) {
  const Dictionary dict = test::toy_dictionary();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> shift(-4, 4);
  for (int trial = 0; trial < 8; ++trial) {
    const int sx = shift(rng), sy = shift(rng);
    const GrayImage im = test::random_image(24, 24, rng());
    GrayImage moved(24, 24);
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) {
        const int ox = x - sx, oy = y - sy;
        moved.at(x, y) = (ox >= 0 && oy >= 0 && ox < 24 && oy < 24) ? im.at(ox, oy) : 0.0;
      }
    }
    const ResponseMaps a = compute_responses(im, dict);
    const ResponseMaps b = compute_responses(moved, dict);
    const int h = dict.half();
    for (int o = 0; o < 3; ++o) {
      for (int y = h; y < 24 - h; ++y) {
        for (int x = h; x < 24 - h; ++x) {
          const int tx = x + sx, ty = y + sy;
          if (!b.is_valid(tx, ty)) continue;
          ASSERT_EQ(a.cos_resp(o, x, y), b.cos_resp(o, tx, ty));
          ASSERT_EQ(a.sin_resp(o, x, y), b.sin_resp(o, tx, ty));
        }
      }
    }
  }
}

TEST(Responses, NegationKeepsEnergy) {
  const Dictionary dict;
  GrayImage im = test::random_image(30, 30, 5);
  const ResponseMaps a = compute_responses(im, dict);
  for (double& v : im.pixels) v = -v;
  const ResponseMaps b = compute_responses(im, dict);
  for (std::size_t i = 0; i < a.energy_data().size(); ++i) ASSERT_NEAR(a.energy_data()[i], b.energy_data()[i], 1e-12);
}

TEST(Normalize, ConstantImageIsDegenerate) {
  EXPECT_THROW(normalize_image(GrayImage(30, 30, 0.7), Dictionary{}), DegenerateImageError);
  EXPECT_THROW(prepare_image(GrayImage(30, 30, 0.0), Dictionary{}), DegenerateImageError);
}

TEST(Normalize, UnitSigmaAndIdempotent) {
  const Dictionary dict;
  const GrayImage im = test::random_image(40, 36, 9);
  const GrayImage n1 = normalize_image(im, dict);
  EXPECT_NEAR(response_sigma(compute_responses(n1, dict)), 1.0, 1e-6);
  const GrayImage n2 = normalize_image(n1, dict);
  for (std::size_t i = 0; i < n1.pixels.size(); ++i) {
    EXPECT_NEAR(n2.pixels[i], n1.pixels[i], 1e-6 * std::max(1.0, std::abs(n1.pixels[i])));
  }
}

TEST(Normalize, PreparedResponsesEqualResponsesOfNormalizedImage) {
  const Dictionary dict = test::toy_dictionary();
  const GrayImage im = test::random_image(20, 20, 13);
  const PreparedImage p = prepare_image(im, dict);
  const ResponseMaps direct = compute_responses(p.image, dict);
  for (std::size_t i = 0; i < direct.energy_data().size(); ++i) {
    ASSERT_NEAR(p.responses.energy_data()[i], direct.energy_data()[i], 1e-12);
  }
}

TEST(Normalize, GratingSigmaMatchesBruteForce) {
  const Dictionary dict;
  const double s = dict.scale();
  GrayImage im(40, 34);
  for (int y = 0; y < im.height; ++y) {
    for (int x = 0; x < im.width; ++x) im.at(x, y) = std::cos(2.0 * kPi * x / s);
  }
  double sum = 0.0;
  int count = 0;
  const int h = dict.half();
  for (int o = 0; o < dict.orientations(); ++o) {
    const GaborElement& g = dict.prototype(o);
    for (int y = h; y < im.height - h; ++y) {
      for (int x = h; x < im.width - h; ++x) {
        double c = 0.0, sn = 0.0;
        for (int dy = -h; dy <= h; ++dy) {
          for (int dx = -h; dx <= h; ++dx) {
            c += im.at(x + dx, y + dy) * g.cos_at(dx, dy);
            sn += im.at(x + dx, y + dy) * g.sin_at(dx, dy);
          }
        }
        sum += c * c + sn * sn;
        ++count;
      }
    }
  }
  EXPECT_NEAR(response_sigma(compute_responses(im, dict)), std::sqrt(sum / count), 1e-8);
}

TEST(Pyramid, IdentityFactorCopiesInput) {
  const GrayImage im = test::random_image(30, 20, 1);
  const std::vector<double> f{1.0};
  const ImagePyramid p = build_pyramid(im, f, 17);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].image, im);
}

TEST(Pyramid, HalvingSizes) {
  const GrayImage im = test::random_image(100, 100, 2);
  const std::vector<double> f{1.0, 0.5};
  const ImagePyramid p = build_pyramid(im, f, 17);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[1].image.width, 50);
  EXPECT_EQ(p[1].image.height, 50);
  // Centre-aligned 2:1 bilinear averages each 2x2 block.
  EXPECT_NEAR(p[1].image.at(10, 7),
              0.25 * (im.at(20, 14) + im.at(21, 14) + im.at(20, 15) + im.at(21, 15)), 1e-12);
}

TEST(Pyramid, SmallLevelsDropAndAllDroppedThrows) {
  const GrayImage im = test::random_image(40, 40, 3);
  const std::vector<double> f{1.0, 0.5, 0.25};
  const ImagePyramid p = build_pyramid(im, f, 17);
  ASSERT_EQ(p.size(), 2u);
  const std::vector<double> tiny{0.25, 0.1};
  EXPECT_THROW(build_pyramid(im, tiny, 17), SizeError);
  const std::vector<double> bad{0.5, 1.0};
  EXPECT_THROW(build_pyramid(im, bad, 17), ConfigError);
}

TEST(Pyramid, DefaultLadderStepsByQuarterOctaves) {
  const auto f = default_factor_ladder();
  ASSERT_EQ(f.size(), 13u);
  EXPECT_DOUBLE_EQ(f.front(), 2.0);
  EXPECT_DOUBLE_EQ(f.back(), 0.25);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(f[i - 1] / f[i], std::exp2(0.25), 1e-12);
  EXPECT_NE(std::find(f.begin(), f.end(), 1.0), f.end());
  EXPECT_NE(std::find(f.begin(), f.end(), 0.5), f.end());
}

TEST(Responses, DumpWritesHeaderAndEnergies) {
  const Dictionary dict = test::toy_dictionary();
  const ResponseMaps r = compute_responses(test::random_image(12, 10, 4), dict);
  const auto p = temp_path("dump.bin");
  dump_responses(p, r);
  std::ifstream in(p, std::ios::binary);
  std::int32_t header[3];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  EXPECT_EQ(header[0], 12);
  EXPECT_EQ(header[1], 10);
  EXPECT_EQ(header[2], 3);
  std::vector<double> values(r.energy_data().size());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  EXPECT_EQ(values, r.energy_data());
}

TEST(Responses, CropPropagatesValidity) {
  const Dictionary dict = test::toy_dictionary();
  const ResponseMaps r = compute_responses(test::random_image(20, 20, 8), dict);
  const ResponseMaps c = r.crop(1, 2, 10, 10);
  EXPECT_EQ(c.valid(), (Rect{2, 1, 10, 10}));
  EXPECT_EQ(c.energy(1, 5, 5), r.energy(1, 6, 7));
}
