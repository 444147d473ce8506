// Image ingestion (PPM P6 and PNG), paired-patch handling, pixel-pair
// sampling, and the seeded synthetic diagonal-illuminant generator used for
// desk-scale verification.

#pragma once

#include <chroma/colorspace.hpp>
#include <chroma/csv.hpp>
#include <chroma/rng.hpp>
#include <chroma/types.hpp>

#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace chroma {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

// Corresponding crops from view A and view B images of one subject.
struct PatchPair {
  FeatureMap patch_a;
  FeatureMap patch_b;
  std::string source_a;
  std::string source_b;
  Rect rect_a;
  Rect rect_b;
};

namespace detail {

inline int ppm_next_token(std::istream& in, std::string& token) {
  token.clear();
  int c = in.get();
  for (;;) {
    while (c == ' ' || c == '\t' || c == '\r' || c == '\n') c = in.get();
    if (c == '#') {  // comment runs to end of line
      while (c != '\n' && c != EOF) c = in.get();
      continue;
    }
    break;
  }
  while (c != EOF && c != ' ' && c != '\t' && c != '\r' && c != '\n' &&
         c != '#') {
    token.push_back(static_cast<char>(c));
    c = in.get();
  }
  return c;
}

inline FeatureMap load_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  std::string tok;
  ppm_next_token(in, tok);
  if (tok != "P6")
    throw Error(Errc::io_error, "unsupported format in " + path +
                                    " (expected P6, got '" + tok + "')");
  long width = 0, height = 0, maxval = 0;
  try {
    ppm_next_token(in, tok);
    width = parse_int(tok);
    ppm_next_token(in, tok);
    height = parse_int(tok);
    ppm_next_token(in, tok);
    maxval = parse_int(tok);
  } catch (const Error&) {
    throw Error(Errc::io_error, "unreadable PPM header in " + path);
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
    throw Error(Errc::io_error, "invalid PPM header in " + path);

  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t n =
      static_cast<std::size_t>(width) * height * 3 * bytes_per_sample;
  std::vector<unsigned char> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw Error(Errc::io_error, "unreadable (truncated) file " + path);

  FeatureMap img(static_cast<int>(width), static_cast<int>(height), 3);
  const double scale = 1.0 / static_cast<double>(maxval);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    unsigned value = raw[pos++];
    if (bytes_per_sample == 2) value = (value << 8) | raw[pos++];  // big-endian
    img.data()[i] = static_cast<double>(value) * scale;
  }
  return img;
}

inline FeatureMap load_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw Error(Errc::io_error, "cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(Errc::io_error, "libpng initialization failed");
  }
  png_bytep* row_ptrs = nullptr;
  if (setjmp(png_jmpbuf(png))) {
    delete[] row_ptrs;
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw Error(Errc::io_error, "unreadable PNG file " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  // normalize everything to 8-bit RGB
  png_set_expand(png);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA)
    png_set_strip_alpha(png);
  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height *
                                    3);
  row_ptrs = new png_bytep[height];
  for (int y = 0; y < height; ++y)
    row_ptrs[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  png_read_image(png, row_ptrs);
  png_read_end(png, nullptr);
  delete[] row_ptrs;
  row_ptrs = nullptr;
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  FeatureMap img(width, height, 3);
  for (std::size_t i = 0; i < img.data().size(); ++i)
    img.data()[i] = pixels[i] / 255.0;
  return img;
}

}  // namespace detail

// Loads a PPM (P6, 8- or 16-bit) or PNG image as a width x height x 3 map of
// reals in [0,1].
inline FeatureMap load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(Errc::io_error, "cannot open " + path);
  unsigned char magic[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(magic), 2);
  probe.close();
  if (magic[0] == 'P' && magic[1] == '6') return detail::load_ppm(path);
  if (magic[0] == 0x89 && magic[1] == 'P') return detail::load_png(path);
  throw Error(Errc::io_error, "unsupported format " + path +
                                  " (PPM P6 or PNG expected)");
}

// 8-bit binary PPM writer; values clamped to [0,1] and rounded.
inline void write_ppm(const std::string& path, const FeatureMap& img) {
  if (img.depth() != 3)
    throw Error(Errc::invalid_input, "PPM output needs a depth-3 map");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_error, "cannot write " + path);
  out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(img.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.data()[i], 0.0, 1.0);
    raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw Error(Errc::io_error, "write failed for " + path);
}

inline FeatureMap crop(const FeatureMap& img, const Rect& r) {
  if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > img.width() ||
      r.y + r.h > img.height())
    throw Error(Errc::invalid_input, "crop rectangle outside image");
  FeatureMap out(r.w, r.h, img.depth());
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < img.depth(); ++c)
        out.at(x, y, c) = img.at(r.x + x, r.y + y, c);
  return out;
}

// Nearest-neighbor resample to the target grid.
inline FeatureMap resample_nn(const FeatureMap& img, int width, int height) {
  if (width < 1 || height < 1)
    throw Error(Errc::invalid_input, "resample target must be positive");
  if (width == img.width() && height == img.height()) return img;
  FeatureMap out(width, height, img.depth());
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(img.height() - 1,
                            static_cast<int>((y + 0.5) * img.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(img.width() - 1,
                              static_cast<int>((x + 0.5) * img.width() / width));
      for (int c = 0; c < img.depth(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

// Brings both patches of a pair onto a shared grid (the elementwise max of
// the two sizes) so pixel correspondences are defined.
inline PatchPair to_common_grid(PatchPair pair) {
  const int w = std::max(pair.patch_a.width(), pair.patch_b.width());
  const int h = std::max(pair.patch_a.height(), pair.patch_b.height());
  pair.patch_a = resample_nn(pair.patch_a, w, h);
  pair.patch_b = resample_nn(pair.patch_b, w, h);
  return pair;
}

// Draws m corresponding pixel pairs uniformly over (pair, location), without
// replacement while the pool lasts (with replacement plus a warning once m
// exceeds it). Pixels are L2-corrected; zero pixels become zero vectors and
// are counted.
inline PixelBatchPair sample_pixel_pairs(const std::vector<PatchPair>& pairs,
                                         Eigen::Index m, std::uint64_t seed) {
  if (pairs.empty())
    throw Error(Errc::invalid_input, "no patch pairs to sample from");
  if (m < 1) throw Error(Errc::invalid_input, "need m >= 1 samples");

  std::vector<PatchPair> common;
  common.reserve(pairs.size());
  for (const auto& p : pairs) common.push_back(to_common_grid(p));

  std::vector<std::size_t> offsets(common.size() + 1, 0);
  for (std::size_t i = 0; i < common.size(); ++i)
    offsets[i + 1] = offsets[i] + static_cast<std::size_t>(
                                      common[i].patch_a.width()) *
                                      common[i].patch_a.height();
  const std::size_t pool = offsets.back();
  if (pool == 0) throw Error(Errc::invalid_input, "patch pairs are empty");

  Rng rng = Rng(seed).split(0);
  std::vector<std::size_t> picks(static_cast<std::size_t>(m));
  if (static_cast<std::size_t>(m) > pool) {
    warn("data", "sampling-with-replacement",
         "m=" + std::to_string(m) + " exceeds " + std::to_string(pool) +
             " distinct correspondences");
    for (auto& p : picks) p = rng.uniform_index(pool);
  } else {  // partial Fisher-Yates for a without-replacement draw
    std::vector<std::size_t> order(pool);
    for (std::size_t i = 0; i < pool; ++i) order[i] = i;
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::size_t j = i + rng.uniform_index(pool - i);
      std::swap(order[i], order[j]);
      picks[i] = order[i];
    }
  }

  PixelBatchPair batch;
  batch.view_a.resize(3, m);
  batch.view_b.resize(3, m);
  std::size_t degenerate = 0;
  for (Eigen::Index col = 0; col < m; ++col) {
    const std::size_t flat = picks[static_cast<std::size_t>(col)];
    const std::size_t which =
        static_cast<std::size_t>(
            std::upper_bound(offsets.begin(), offsets.end(), flat) -
            offsets.begin()) -
        1;
    const PatchPair& p = common[which];
    const std::size_t local = flat - offsets[which];
    const int x = static_cast<int>(local % p.patch_a.width());
    const int y = static_cast<int>(local / p.patch_a.width());
    const ColorVector a = l2_correct_or_zero(
        {p.patch_a.at(x, y, 0), p.patch_a.at(x, y, 1), p.patch_a.at(x, y, 2)},
        &degenerate);
    const ColorVector b = l2_correct_or_zero(
        {p.patch_b.at(x, y, 0), p.patch_b.at(x, y, 1), p.patch_b.at(x, y, 2)},
        &degenerate);
    batch.view_a.col(col) << a.c1, a.c2, a.c3;
    batch.view_b.col(col) << b.c1, b.c2, b.c3;
  }
  if (degenerate > 0)
    warn("data", "degenerate-pixels",
         std::to_string(degenerate) + " zero pixels mapped to zero vectors");
  return batch;
}

// ---------------------------------------------------------------------------
// Annotation files: CSV rows `image_a,image_b,ax,ay,aw,ah,bx,by,bw,bh` with a
// header line; image paths are resolved relative to the file's directory.

struct AnnotationRow {
  std::string image_a;
  std::string image_b;
  Rect rect_a;
  Rect rect_b;
};

inline const char* kAnnotationHeader =
    "image_a,image_b,ax,ay,aw,ah,bx,by,bw,bh";

inline std::vector<AnnotationRow> parse_annotations(const std::string& path) {
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines.front() != kAnnotationHeader)
    throw Error(Errc::invalid_input,
                "annotation file " + path + " missing header '" +
                    kAnnotationHeader + "'");
  std::vector<AnnotationRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 10)
      throw Error(Errc::invalid_input,
                  "annotation line " + std::to_string(i + 1) + " has " +
                      std::to_string(f.size()) + " fields, expected 10");
    AnnotationRow row;
    row.image_a = f[0];
    row.image_b = f[1];
    row.rect_a = {static_cast<int>(parse_int(f[2])),
                  static_cast<int>(parse_int(f[3])),
                  static_cast<int>(parse_int(f[4])),
                  static_cast<int>(parse_int(f[5]))};
    row.rect_b = {static_cast<int>(parse_int(f[6])),
                  static_cast<int>(parse_int(f[7])),
                  static_cast<int>(parse_int(f[8])),
                  static_cast<int>(parse_int(f[9]))};
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string annotations_to_csv(const std::vector<AnnotationRow>& rows) {
  std::string out = std::string(kAnnotationHeader) + "\n";
  for (const auto& r : rows) {
    out += r.image_a + ',' + r.image_b + ',' + std::to_string(r.rect_a.x) +
           ',' + std::to_string(r.rect_a.y) + ',' + std::to_string(r.rect_a.w) +
           ',' + std::to_string(r.rect_a.h) + ',' + std::to_string(r.rect_b.x) +
           ',' + std::to_string(r.rect_b.y) + ',' + std::to_string(r.rect_b.w) +
           ',' + std::to_string(r.rect_b.h) + '\n';
  }
  return out;
}

// Loads and crops every annotated pair. Images are cached per path.
inline std::vector<PatchPair> load_patch_pairs(
    const std::string& annotation_path) {
  const auto rows = parse_annotations(annotation_path);
  const std::filesystem::path base =
      std::filesystem::path(annotation_path).parent_path();
  std::map<std::string, FeatureMap> cache;
  auto fetch = [&](const std::string& rel) -> const FeatureMap& {
    auto it = cache.find(rel);
    if (it == cache.end())
      it = cache.emplace(rel, load_image((base / rel).string())).first;
    return it->second;
  };
  std::vector<PatchPair> pairs;
  pairs.reserve(rows.size());
  for (const auto& r : rows) {
    PatchPair p;
    p.patch_a = crop(fetch(r.image_a), r.rect_a);
    p.patch_b = crop(fetch(r.image_b), r.rect_b);
    p.source_a = r.image_a;
    p.source_b = r.image_b;
    p.rect_a = r.rect_a;
    p.rect_b = r.rect_b;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Synthetic diagonal-illuminant scenes. Each identity is a striped layout of
// random colors; view A applies illuminant_a, view B applies the relative
// per-pixel diagonal gains (illuminant_b / illuminant_a, jittered), then
// additive noise, then clipping to [0,1]. Disjoint identities are generated
// for training so evaluation data stays held out.

struct SyntheticSceneSpec {
  int n_identities = 50;        // evaluation identities (probe/gallery)
  int colors_per_identity = 4;
  std::array<double, 3> illuminant_a{1.0, 1.0, 1.0};
  std::array<double, 3> illuminant_b{1.6, 1.0, 0.7};
  double sigma_gain = 0.0;   // per-pixel multiplicative gain jitter
  double sigma_noise = 0.0;  // additive Gaussian noise
  std::uint64_t seed = 0;
  int width = 16;
  int height = 32;
  int train_identities = 0;      // 0 = same count as n_identities
  int patches_per_identity = 3;

  void validate() const {
    if (n_identities < 1)
      throw Error(Errc::invalid_input, "need at least one identity");
    if (colors_per_identity < 1)
      throw Error(Errc::invalid_input, "need at least one color");
    for (int c = 0; c < 3; ++c)
      if (!(illuminant_a[c] > 0.0) || !(illuminant_b[c] > 0.0))
        throw Error(Errc::invalid_input, "illuminant gains must be positive");
    if (sigma_gain < 0.0 || sigma_noise < 0.0)
      throw Error(Errc::invalid_input, "noise levels must be nonnegative");
    if (width < 4 || height < 4)
      throw Error(Errc::invalid_input, "scene must be at least 4x4");
    if (patches_per_identity < 1)
      throw Error(Errc::invalid_input, "need at least one patch per identity");
  }
};

struct SyntheticDataset {
  std::vector<FeatureMap> train_a;  // one image pair per training identity
  std::vector<FeatureMap> train_b;
  std::vector<AnnotationRow> annotations;  // rectangles into train images
  std::vector<PatchPair> train_pairs;      // the same rectangles, cropped
  std::vector<FeatureMap> probe_images;    // view A of each test identity
  std::vector<FeatureMap> gallery_images;  // view B of each test identity
  std::vector<int> probe_labels;
  std::vector<int> gallery_labels;
  std::vector<std::string> probe_ids;
  std::vector<std::string> gallery_ids;
};

namespace detail {

inline std::string zero_pad(int v, int digits) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < digits) s.insert(s.begin(), '0');
  return s;
}

// Renders one identity: stripes of its colors, then the two views.
inline std::pair<FeatureMap, FeatureMap> render_views(
    const SyntheticSceneSpec& spec, const std::vector<RgbPixel>& colors,
    Rng& rng) {
  FeatureMap view_a(spec.width, spec.height, 3);
  FeatureMap view_b(spec.width, spec.height, 3);
  const int stripes = static_cast<int>(colors.size());
  for (int y = 0; y < spec.height; ++y) {
    const int stripe = std::min(stripes - 1, y * stripes / spec.height);
    const RgbPixel& base = colors[static_cast<std::size_t>(stripe)];
    for (int x = 0; x < spec.width; ++x) {
      const double base_c[3] = {base.r, base.g, base.b};
      for (int c = 0; c < 3; ++c) {
        const double a_pre = spec.illuminant_a[c] * base_c[c];
        const double gain = spec.illuminant_b[c] / spec.illuminant_a[c] *
                            (1.0 + spec.sigma_gain * rng.normal());
        const double b_pre = gain * a_pre;
        view_a.at(x, y, c) =
            std::clamp(a_pre + spec.sigma_noise * rng.normal(), 0.0, 1.0);
        view_b.at(x, y, c) =
            std::clamp(b_pre + spec.sigma_noise * rng.normal(), 0.0, 1.0);
      }
    }
  }
  return {std::move(view_a), std::move(view_b)};
}

inline std::vector<RgbPixel> random_colors(int count, Rng& rng) {
  std::vector<RgbPixel> colors(static_cast<std::size_t>(count));
  for (auto& c : colors) {  // away from black so L2 correction stays defined
    c.r = 0.05 + 0.90 * rng.uniform();
    c.g = 0.05 + 0.90 * rng.uniform();
    c.b = 0.05 + 0.90 * rng.uniform();
  }
  return colors;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticSceneSpec& spec) {
  spec.validate();
  const int n_train =
      spec.train_identities > 0 ? spec.train_identities : spec.n_identities;

  SyntheticDataset ds;
  Rng root(spec.seed);
  Rng train_rng = root.split(1);
  Rng test_rng = root.split(2);
  Rng patch_rng = root.split(3);

  for (int id = 0; id < n_train; ++id) {
    const auto colors =
        detail::random_colors(spec.colors_per_identity, train_rng);
    auto [a, b] = detail::render_views(spec, colors, train_rng);
    const std::string name = detail::zero_pad(id, 3);
    const std::string path_a = "train/a_" + name + ".ppm";
    const std::string path_b = "train/b_" + name + ".ppm";

    // corresponding rectangles; views are pixel-aligned by construction
    const int pw = std::max(4, spec.width / 2);
    const int ph = std::max(4, spec.height / 2);
    for (int k = 0; k < spec.patches_per_identity; ++k) {
      Rect r;
      r.w = pw;
      r.h = ph;
      r.x = static_cast<int>(
          patch_rng.uniform_index(static_cast<std::uint64_t>(spec.width - pw) + 1));
      r.y = static_cast<int>(patch_rng.uniform_index(
          static_cast<std::uint64_t>(spec.height - ph) + 1));
      ds.annotations.push_back({path_a, path_b, r, r});
      PatchPair pair;
      pair.patch_a = crop(a, r);
      pair.patch_b = crop(b, r);
      pair.source_a = path_a;
      pair.source_b = path_b;
      pair.rect_a = r;
      pair.rect_b = r;
      ds.train_pairs.push_back(std::move(pair));
    }
    ds.train_a.push_back(std::move(a));
    ds.train_b.push_back(std::move(b));
  }

  for (int id = 0; id < spec.n_identities; ++id) {
    const auto colors =
        detail::random_colors(spec.colors_per_identity, test_rng);
    auto [a, b] = detail::render_views(spec, colors, test_rng);
    ds.probe_images.push_back(std::move(a));
    ds.gallery_images.push_back(std::move(b));
    ds.probe_labels.push_back(id);
    ds.gallery_labels.push_back(id);
    ds.probe_ids.push_back("p_" + detail::zero_pad(id, 3));
    ds.gallery_ids.push_back("g_" + detail::zero_pad(id, 3));
  }
  return ds;
}

// Flat key=value configs (synthetic scene spec, hyperparameters). Lines
// starting with '#' are comments.
inline std::map<std::string, std::string> parse_kv_file(
    const std::string& path) {
  std::map<std::string, std::string> kv;
  for (const std::string& line : read_lines(path)) {
    if (line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::invalid_input, "expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline SyntheticSceneSpec scene_spec_from_kv(
    const std::map<std::string, std::string>& kv) {
  SyntheticSceneSpec spec;
  for (const auto& [key, value] : kv) {
    if (key == "n_identities") spec.n_identities = static_cast<int>(parse_int(value));
    else if (key == "colors_per_identity") spec.colors_per_identity = static_cast<int>(parse_int(value));
    else if (key == "illuminant_a_r") spec.illuminant_a[0] = parse_real(value);
    else if (key == "illuminant_a_g") spec.illuminant_a[1] = parse_real(value);
    else if (key == "illuminant_a_b") spec.illuminant_a[2] = parse_real(value);
    else if (key == "illuminant_b_r") spec.illuminant_b[0] = parse_real(value);
    else if (key == "illuminant_b_g") spec.illuminant_b[1] = parse_real(value);
    else if (key == "illuminant_b_b") spec.illuminant_b[2] = parse_real(value);
    else if (key == "sigma_gain") spec.sigma_gain = parse_real(value);
    else if (key == "sigma_noise") spec.sigma_noise = parse_real(value);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_int(value));
    else if (key == "width") spec.width = static_cast<int>(parse_int(value));
    else if (key == "height") spec.height = static_cast<int>(parse_int(value));
    else if (key == "train_identities") spec.train_identities = static_cast<int>(parse_int(value));
    else if (key == "patches_per_identity") spec.patches_per_identity = static_cast<int>(parse_int(value));
    else throw Error(Errc::invalid_input, "unknown scene key '" + key + "'");
  }
  return spec;
}

}  // namespace chroma
