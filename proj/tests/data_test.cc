#include <chroma/data.hpp>
#include <chroma/rng.hpp>

#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace chroma;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    dir_ = fs::temp_directory_path() /
           ("chroma_data_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter_++));
    fs::create_directories(dir_);
  }
  ~TempDir() { fs::remove_all(dir_); }
  std::string path(const std::string& name) const {
    return (dir_ / name).string();
  }
  const fs::path& dir() const { return dir_; }

 private:
  static inline int counter_ = 0;
  fs::path dir_;
};

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(LoadImage, ReadsEightBitPpm) {
  TempDir tmp;
  const std::string path = tmp.path("white.ppm");
  std::string bytes = "P6\n2 2\n255\n";
  bytes.append(12, static_cast<char>(0xFF));
  write_bytes(path, bytes);

  const FeatureMap img = load_image(path);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 2);
  EXPECT_EQ(img.depth(), 3);
  for (double v : img.data()) EXPECT_EQ(v, 1.0);
}

TEST(LoadImage, ReadsPpmWithCommentsAndMidGray) {
  TempDir tmp;
  const std::string path = tmp.path("gray.ppm");
  std::string bytes = "P6\n# a comment\n1 1\n# another\n255\n";
  bytes.push_back(static_cast<char>(128));
  bytes.push_back(static_cast<char>(64));
  bytes.push_back(static_cast<char>(0));
  write_bytes(path, bytes);
  const FeatureMap img = load_image(path);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 128.0 / 255.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 64.0 / 255.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 2), 0.0);
}

TEST(LoadImage, ReadsSixteenBitPpm) {
  TempDir tmp;
  const std::string path = tmp.path("deep.ppm");
  std::string bytes = "P6\n1 1\n65535\n";
  // one pixel, big-endian 16-bit samples: 65535, 0, 32768
  const unsigned char samples[6] = {0xFF, 0xFF, 0x00, 0x00, 0x80, 0x00};
  bytes.append(reinterpret_cast<const char*>(samples), 6);
  write_bytes(path, bytes);
  const FeatureMap img = load_image(path);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 2), 32768.0 / 65535.0);
}

TEST(LoadImage, TruncatedFileIsUnreadable) {
  TempDir tmp;
  const std::string path = tmp.path("short.ppm");
  write_bytes(path, "P6\n4 4\n255\nabc");  // far fewer bytes than 48
  EXPECT_THROW(load_image(path), Error);
}

TEST(LoadImage, RejectsUnknownFormats) {
  TempDir tmp;
  const std::string path = tmp.path("noise.bin");
  write_bytes(path, "garbage-bytes");
  EXPECT_THROW(load_image(path), Error);
  EXPECT_THROW(load_image(tmp.path("missing.ppm")), Error);
}

TEST(LoadImage, RoundTripsThroughPpmWriter) {
  TempDir tmp;
  Rng rng(5);
  FeatureMap img(7, 4, 3);
  for (double& v : img.data()) v = rng.uniform();
  const std::string path = tmp.path("roundtrip.ppm");
  write_ppm(path, img);
  const FeatureMap back = load_image(path);
  ASSERT_EQ(back.width(), 7);
  ASSERT_EQ(back.height(), 4);
  for (std::size_t i = 0; i < img.data().size(); ++i)
    EXPECT_NEAR(back.data()[i], img.data()[i], 0.5 / 255.0 + 1e-9);
}

TEST(LoadImage, ReadsPngWrittenByLibpng) {
  TempDir tmp;
  const std::string path = tmp.path("img.png");
  {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    ASSERT_NE(fp, nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    ASSERT_EQ(setjmp(png_jmpbuf(png)), 0);
    png_init_io(png, fp);
    png_set_IHDR(png, info, 2, 1, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    unsigned char row[6] = {255, 0, 0, 0, 128, 255};
    png_bytep rows[1] = {row};
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
  }
  const FeatureMap img = load_image(path);
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 1);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(img.at(1, 0, 1), 128.0 / 255.0);
  EXPECT_DOUBLE_EQ(img.at(1, 0, 2), 1.0);
}

TEST(SamplePixelPairs, TinyPoolSamplesWithReplacement) {
  PatchPair pair;
  pair.patch_a = FeatureMap(1, 1, 3);
  pair.patch_a.at(0, 0, 0) = 0.2;
  pair.patch_a.at(0, 0, 1) = 0.4;
  pair.patch_a.at(0, 0, 2) = 0.4;
  pair.patch_b = pair.patch_a;

  const PixelBatchPair batch = sample_pixel_pairs({pair}, 5, 3);
  EXPECT_EQ(batch.count(), 5);
  for (Eigen::Index j = 0; j < 5; ++j) {
    EXPECT_EQ(batch.view_a.col(j), batch.view_a.col(0));
    EXPECT_EQ(batch.view_a.col(j), batch.view_b.col(j));
  }
  // L2-corrected: norm 1
  EXPECT_NEAR(batch.view_a.col(0).norm(), 1.0, 1e-12);
}

TEST(SamplePixelPairs, DeterministicPerSeed) {
  Rng rng(8);
  PatchPair pair;
  pair.patch_a = FeatureMap(5, 4, 3);
  for (double& v : pair.patch_a.data()) v = 0.05 + 0.9 * rng.uniform();
  pair.patch_b = FeatureMap(5, 4, 3);
  for (double& v : pair.patch_b.data()) v = 0.05 + 0.9 * rng.uniform();

  const PixelBatchPair b1 = sample_pixel_pairs({pair}, 10, 42);
  const PixelBatchPair b2 = sample_pixel_pairs({pair}, 10, 42);
  EXPECT_EQ(b1.view_a, b2.view_a);
  EXPECT_EQ(b1.view_b, b2.view_b);
  const PixelBatchPair b3 = sample_pixel_pairs({pair}, 10, 43);
  EXPECT_NE(b1.view_a, b3.view_a);
}

TEST(SamplePixelPairs, PreservesPairing) {
  // encode the location into the pixel so broken pairing is detectable:
  // patch_b = patch_a means corrected columns must agree pairwise
  PatchPair pair;
  pair.patch_a = FeatureMap(6, 6, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      pair.patch_a.at(x, y, 0) = 0.1 + 0.1 * x;
      pair.patch_a.at(x, y, 1) = 0.1 + 0.1 * y;
      pair.patch_a.at(x, y, 2) = 0.35;
    }
  pair.patch_b = pair.patch_a;
  const PixelBatchPair batch = sample_pixel_pairs({pair}, 36, 7);
  EXPECT_EQ(batch.view_a, batch.view_b);

  // without replacement: all 36 sampled locations are distinct
  std::vector<std::pair<double, double>> seen;
  for (Eigen::Index j = 0; j < 36; ++j)
    seen.emplace_back(batch.view_a(0, j), batch.view_a(1, j));
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::unique(seen.begin(), seen.end()), seen.end());
}

TEST(SamplePixelPairs, ResamplesMismatchedSizesToCommonGrid) {
  Rng rng(12);
  PatchPair pair;
  pair.patch_a = FeatureMap(4, 4, 3);
  for (double& v : pair.patch_a.data()) v = 0.05 + 0.9 * rng.uniform();
  pair.patch_b = FeatureMap(8, 8, 3);
  for (double& v : pair.patch_b.data()) v = 0.05 + 0.9 * rng.uniform();
  const PixelBatchPair batch = sample_pixel_pairs({pair}, 64, 5);
  EXPECT_EQ(batch.count(), 64);  // pool is the 8x8 common grid
}

TEST(SamplePixelPairs, EmptyListIsAnError) {
  EXPECT_THROW(sample_pixel_pairs({}, 5, 1), Error);
}

TEST(Synthetic, IdenticalIlluminantsAndZeroNoiseGiveIdenticalViews) {
  SyntheticSceneSpec spec;
  spec.n_identities = 3;
  spec.train_identities = 2;
  spec.illuminant_a = {1.0, 1.0, 1.0};
  spec.illuminant_b = {1.0, 1.0, 1.0};
  spec.sigma_gain = 0.0;
  spec.sigma_noise = 0.0;
  spec.seed = 9;
  const SyntheticDataset ds = generate_synthetic(spec);
  ASSERT_EQ(ds.train_a.size(), 2u);
  for (std::size_t i = 0; i < ds.train_a.size(); ++i)
    EXPECT_EQ(ds.train_a[i].data(), ds.train_b[i].data());
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i)
    EXPECT_EQ(ds.probe_images[i].data(), ds.gallery_images[i].data());
}

TEST(Synthetic, DiagonalGainOnKnownColor) {
  SyntheticSceneSpec spec;
  spec.illuminant_b = {2.0, 1.0, 1.0};
  Rng rng(1);
  const std::vector<RgbPixel> colors = {{0.3, 0.3, 0.3}};
  const auto [view_a, view_b] = detail::render_views(spec, colors, rng);
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      EXPECT_DOUBLE_EQ(view_a.at(x, y, 0), 0.3);
      EXPECT_DOUBLE_EQ(view_b.at(x, y, 0), 0.6);
      EXPECT_DOUBLE_EQ(view_b.at(x, y, 1), 0.3);
      EXPECT_DOUBLE_EQ(view_b.at(x, y, 2), 0.3);
    }
}

TEST(Synthetic, ViewBIsDiagonalTransformOfViewA) {
  // zero jitter and noise: B must equal diag(gb/ga) * A exactly on every
  // pixel (gains below 1 so nothing clips)
  SyntheticSceneSpec spec;
  spec.n_identities = 4;
  spec.illuminant_a = {1.0, 0.9, 0.8};
  spec.illuminant_b = {0.7, 1.0, 0.5};
  spec.sigma_gain = 0.0;
  spec.sigma_noise = 0.0;
  spec.seed = 31;
  const SyntheticDataset ds = generate_synthetic(spec);
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i) {
    const FeatureMap& a = ds.probe_images[i];
    const FeatureMap& b = ds.gallery_images[i];
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        for (int c = 0; c < 3; ++c) {
          const double gain = spec.illuminant_b[static_cast<std::size_t>(c)] /
                              spec.illuminant_a[static_cast<std::size_t>(c)];
          EXPECT_EQ(b.at(x, y, c), gain * a.at(x, y, c));
        }
  }
}

TEST(Synthetic, SameSeedSameDataset) {
  SyntheticSceneSpec spec;
  spec.n_identities = 3;
  spec.sigma_gain = 0.05;
  spec.sigma_noise = 0.01;
  spec.seed = 12;
  const SyntheticDataset d1 = generate_synthetic(spec);
  const SyntheticDataset d2 = generate_synthetic(spec);
  ASSERT_EQ(d1.probe_images.size(), d2.probe_images.size());
  for (std::size_t i = 0; i < d1.probe_images.size(); ++i)
    EXPECT_EQ(d1.probe_images[i].data(), d2.probe_images[i].data());
  for (std::size_t i = 0; i < d1.train_pairs.size(); ++i)
    EXPECT_EQ(d1.train_pairs[i].patch_a.data(),
              d2.train_pairs[i].patch_a.data());

  spec.seed = 13;
  const SyntheticDataset d3 = generate_synthetic(spec);
  EXPECT_NE(d1.probe_images[0].data(), d3.probe_images[0].data());
}

TEST(Annotations, RoundTripAndPatchLoading) {
  TempDir tmp;
  fs::create_directories(tmp.dir() / "imgs");
  Rng rng(3);
  FeatureMap img_a(8, 6, 3);
  FeatureMap img_b(8, 6, 3);
  for (double& v : img_a.data()) v = rng.uniform();
  for (double& v : img_b.data()) v = rng.uniform();
  write_ppm(tmp.path("imgs/a.ppm"), img_a);
  write_ppm(tmp.path("imgs/b.ppm"), img_b);

  std::vector<AnnotationRow> rows = {
      {"imgs/a.ppm", "imgs/b.ppm", {1, 2, 4, 3}, {0, 0, 5, 4}},
      {"imgs/a.ppm", "imgs/b.ppm", {0, 0, 8, 6}, {0, 0, 8, 6}},
  };
  const std::string csv_path = tmp.path("annotations.csv");
  write_text_file(csv_path, annotations_to_csv(rows));

  const auto parsed = parse_annotations(csv_path);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].image_a, "imgs/a.ppm");
  EXPECT_EQ(parsed[0].rect_a.w, 4);
  EXPECT_EQ(parsed[1].rect_b.h, 6);

  const auto pairs = load_patch_pairs(csv_path);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].patch_a.width(), 4);
  EXPECT_EQ(pairs[0].patch_a.height(), 3);
  EXPECT_EQ(pairs[0].patch_b.width(), 5);
  EXPECT_EQ(pairs[1].patch_a.width(), 8);
  // crop content matches the source image
  EXPECT_DOUBLE_EQ(pairs[0].patch_a.at(0, 0, 0),
                   load_image(tmp.path("imgs/a.ppm")).at(1, 2, 0));
}

TEST(Annotations, RejectsMalformedFiles) {
  TempDir tmp;
  const std::string path = tmp.path("bad.csv");
  write_text_file(path, "not,the,header\n");
  EXPECT_THROW(parse_annotations(path), Error);
  write_text_file(path, std::string(kAnnotationHeader) + "\nonly,three,fields\n");
  EXPECT_THROW(parse_annotations(path), Error);
}

TEST(KvConfig, ParsesSceneSpecs) {
  TempDir tmp;
  const std::string path = tmp.path("scene.cfg");
  write_text_file(path,
                  "# comment\nn_identities=12\nilluminant_b_r=1.6\n"
                  "sigma_gain=0.05\nseed=7\nwidth=24\n");
  const SyntheticSceneSpec spec = scene_spec_from_kv(parse_kv_file(path));
  EXPECT_EQ(spec.n_identities, 12);
  EXPECT_DOUBLE_EQ(spec.illuminant_b[0], 1.6);
  EXPECT_DOUBLE_EQ(spec.sigma_gain, 0.05);
  EXPECT_EQ(spec.seed, 7u);
  EXPECT_EQ(spec.width, 24);

  write_text_file(path, "bogus_key=1\n");
  EXPECT_THROW(scene_spec_from_kv(parse_kv_file(path)), Error);
}
