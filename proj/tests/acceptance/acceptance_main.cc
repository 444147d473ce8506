// Acceptance suite: one pass/fail line per criterion. Pass the CLI binary
// path as argv[1] (needed by the determinism criterion). Exit code is the
// number of failed criteria.

#include <chroma/colorspace.hpp>
#include <chroma/csv.hpp>
#include <chroma/data.hpp>
#include <chroma/encode.hpp>
#include <chroma/eval.hpp>
#include <chroma/histogram.hpp>
#include <chroma/objective.hpp>
#include <chroma/optim.hpp>
#include <chroma/rng.hpp>

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace chroma;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

// ---------------------------------------------------------------------------
// shared helpers

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = scale * rng.normal();
  return m;
}

struct Instance {
  ModelParams params;
  HyperParams hyper;
  PixelBatchPair batch;
  SparseCodePair codes;
};

Instance random_instance(std::uint64_t seed, int n, int h, int d, int m) {
  Rng rng(seed);
  Instance inst;
  inst.params.w1 = gaussian(n, h, rng, 0.5);
  inst.params.b1 = gaussian(h, 1, rng, 0.5);
  inst.params.w2 = gaussian(h, n, rng, 0.5);
  inst.params.b2 = gaussian(n, 1, rng, 0.5);
  inst.params.dict = gaussian(h, d, rng, 0.5);
  inst.hyper.h = h;
  inst.hyper.d = d;
  inst.batch.view_a = Matrix::NullaryExpr(n, m, [&] { return rng.uniform(); });
  inst.batch.view_b = Matrix::NullaryExpr(n, m, [&] { return rng.uniform(); });
  inst.codes.alpha_a = gaussian(d, m, rng, 0.5);
  inst.codes.alpha_b = gaussian(d, m, rng, 0.5);
  return inst;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double fd_max_rel_error(const Instance& inst, GradBlock block, double step) {
  Instance work = inst;
  const GradientSet analytic =
      grad(inst.params, inst.hyper, inst.batch, inst.codes, block);

  std::vector<double*> slots;
  std::vector<double> expected;
  auto add = [&](Matrix& m, const Matrix& g) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      slots.push_back(m.data() + i);
      expected.push_back(g.data()[i]);
    }
  };
  auto add_vec = [&](Vector& v, const Vector& g) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      slots.push_back(v.data() + i);
      expected.push_back(g(i));
    }
  };
  switch (block) {
    case GradBlock::encoder:
      add(work.params.w1, analytic.d_w1);
      add_vec(work.params.b1, analytic.d_b1);
      add(work.params.w2, analytic.d_w2);
      add_vec(work.params.b2, analytic.d_b2);
      break;
    case GradBlock::dict:
      add(work.params.dict, analytic.d_dict);
      break;
    case GradBlock::codes:
      add(work.codes.alpha_a, analytic.d_alpha_a);
      add(work.codes.alpha_b, analytic.d_alpha_b);
      break;
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double saved = *slots[i];
    *slots[i] = saved + step;
    const double up =
        loss(work.params, work.hyper, work.batch, work.codes).total;
    *slots[i] = saved - step;
    const double down =
        loss(work.params, work.hyper, work.batch, work.codes).total;
    *slots[i] = saved;
    worst = std::max(worst, relative_error(expected[i],
                                           (up - down) / (2.0 * step)));
  }
  return worst;
}

// Scene used by the training-based criteria; gains and noise pinned by the
// acceptance statement.
SyntheticSceneSpec acceptance_scene(int identities, int train_identities) {
  SyntheticSceneSpec spec;
  spec.n_identities = identities;
  spec.train_identities = train_identities;
  spec.colors_per_identity = 4;
  spec.illuminant_a = {1.0, 1.0, 1.0};
  spec.illuminant_b = {1.6, 1.0, 0.7};
  spec.sigma_gain = 0.05;
  spec.sigma_noise = 0.01;
  spec.seed = 7;
  spec.width = 16;
  spec.height = 32;
  return spec;
}

HyperParams acceptance_hyper() {
  HyperParams hp;
  hp.h = 16;
  hp.d = 24;
  hp.lbfgs_iters = 25;
  hp.outer_iters = 8;
  return hp;
}

// Held-out paired pixels from the evaluation identities of a scene.
PixelBatchPair held_out_pairs(const SyntheticDataset& ds, Eigen::Index m,
                              std::uint64_t seed) {
  std::vector<PatchPair> pairs;
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i) {
    PatchPair p;
    p.patch_a = ds.probe_images[i];
    p.patch_b = ds.gallery_images[i];
    pairs.push_back(std::move(p));
  }
  return sample_pixel_pairs(pairs, m, seed);
}

double mean_paired_code_distance(const ModelParams& params,
                                 const HyperParams& hyper,
                                 const PixelBatchPair& batch) {
  const Matrix codes_a = encode_codes(params, hyper, lift(params, batch.view_a));
  const Matrix codes_b = encode_codes(params, hyper, lift(params, batch.view_b));
  double sum = 0.0;
  for (Eigen::Index j = 0; j < codes_a.cols(); ++j)
    sum += (codes_a.col(j) - codes_b.col(j)).norm();
  return sum / static_cast<double>(codes_a.cols());
}

// Layer-1 signatures for every probe/gallery image under one model.
std::pair<std::vector<Vector>, std::vector<Vector>> signatures_for(
    const ModelParams& params, const HyperParams& hyper,
    const SyntheticDataset& ds) {
  std::vector<Vector> probe(ds.probe_images.size());
  std::vector<Vector> gallery(ds.gallery_images.size());
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i)
    probe[i] = encode_signature(params, hyper, correct_image(ds.probe_images[i]));
  for (std::size_t i = 0; i < ds.gallery_images.size(); ++i)
    gallery[i] =
        encode_signature(params, hyper, correct_image(ds.gallery_images[i]));
  return {std::move(probe), std::move(gallery)};
}

double rank1_for_model(const ModelParams& params, const HyperParams& hyper,
                       const SyntheticDataset& ds) {
  const auto [probe, gallery] = signatures_for(params, hyper, ds);
  const Matrix dist =
      distance_matrix(probe, gallery, DistanceMetric::euclidean);
  return cmc(dist, ds.probe_labels, ds.gallery_labels).values.front();
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + g_cli_path +
                          "' " + args + " >/dev/null 2>>cli_stderr.log";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// criteria

bool criterion1_gradients(std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = random_instance(seed, 3, 5, 8, 10);
    for (GradBlock block :
         {GradBlock::codes, GradBlock::dict, GradBlock::encoder})
      worst = std::max(worst, fd_max_rel_error(inst, block, 1e-6));
  }
  detail = "max relative error " + format_real(worst) + " over 20 instances";
  return worst < 1e-6;
}

bool criterion2_descent(std::string& detail) {
  const SyntheticSceneSpec scene = acceptance_scene(8, 8);
  const SyntheticDataset ds = generate_synthetic(scene);
  const PixelBatchPair batch = sample_pixel_pairs(ds.train_pairs, 2000, 11);

  HyperParams hp = acceptance_hyper();
  hp.outer_iters = 6;
  const auto [params, report] = train(batch, hp, TrainMode::joint, 5);

  double worst_rise = 0.0;
  for (std::size_t i = 1; i < report.phase_trace.size(); ++i)
    worst_rise = std::max(worst_rise, report.phase_trace[i].loss.total -
                                          report.phase_trace[i - 1].loss.total);
  for (std::size_t i = 1; i < report.trace.size(); ++i)
    worst_rise = std::max(
        worst_rise, report.trace[i].total - report.trace[i - 1].total);
  detail = "worst per-phase rise " + format_real(worst_rise) + " over " +
           std::to_string(report.phase_trace.size()) + " phase records (m=2000)";
  return worst_rise <= 1e-10;
}

bool criterion3_invariance_gain(std::string& detail) {
  const SyntheticSceneSpec scene = acceptance_scene(10, 12);
  const SyntheticDataset ds = generate_synthetic(scene);
  const PixelBatchPair train_batch =
      sample_pixel_pairs(ds.train_pairs, 1500, 21);
  const PixelBatchPair held_out = held_out_pairs(ds, 400, 22);

  // desk-scale operating point: the unnormalized decay terms must not
  // dominate the per-sample data terms at h=16/d=24, and the cross-view
  // coupling needs enough weight and rounds to shape the encoder
  HyperParams hp = acceptance_hyper();
  hp.beta = 5.0;
  hp.gamma = 5.0;
  hp.rho = 1e-4;
  hp.outer_iters = 40;
  const std::uint64_t seed = 7;
  const auto [init_model, init_codes] = init_params(hp, train_batch, seed);
  const auto [trained_model, report] =
      train(train_batch, hp, TrainMode::joint, seed);

  const double before = mean_paired_code_distance(init_model, hp, held_out);
  const double after = mean_paired_code_distance(trained_model, hp, held_out);
  detail = "held-out mean code distance " + format_real(before) + " -> " +
           format_real(after) + " (ratio " + format_real(after / before) + ")";
  return after <= 0.5 * before;
}

bool criterion4_ablation_ordering(std::string& detail) {
  const SyntheticSceneSpec scene = acceptance_scene(50, 25);
  const SyntheticDataset ds = generate_synthetic(scene);
  const PixelBatchPair batch = sample_pixel_pairs(ds.train_pairs, 1500, 31);
  const HyperParams hp = acceptance_hyper();

  const auto [joint_model, r1] = train(batch, hp, TrainMode::joint, 7);
  const auto [wcc_model, r2] = train(batch, hp, TrainMode::wcc, 7);
  const auto [indep_model, r3] = train(batch, hp, TrainMode::independent, 7);

  const double rank1_joint = rank1_for_model(joint_model, hp, ds);
  const double rank1_wcc = rank1_for_model(wcc_model, hp, ds);
  const double rank1_indep = rank1_for_model(indep_model, hp, ds);

  // raw RGB histogram baseline, no illumination handling
  BlockHistogramSpec spec;
  spec.ranges = default_ranges(ColorSpaceTag::rgb);
  std::vector<Vector> probe(ds.probe_images.size());
  std::vector<Vector> gallery(ds.gallery_images.size());
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i) {
    const ImageSignature sig = block_histogram(ds.probe_images[i], spec);
    probe[i] = Eigen::Map<const Vector>(sig.data(),
                                        static_cast<Eigen::Index>(sig.size()));
  }
  for (std::size_t i = 0; i < ds.gallery_images.size(); ++i) {
    const ImageSignature sig = block_histogram(ds.gallery_images[i], spec);
    gallery[i] = Eigen::Map<const Vector>(
        sig.data(), static_cast<Eigen::Index>(sig.size()));
  }
  const double rank1_rgbhist =
      cmc(distance_matrix(probe, gallery, DistanceMetric::euclidean),
          ds.probe_labels, ds.gallery_labels)
          .values.front();

  detail = "rank-1: joint " + format_real(rank1_joint) + ", wcc " +
           format_real(rank1_wcc) + ", independent " +
           format_real(rank1_indep) + ", rgbhist " +
           format_real(rank1_rgbhist) +
           " (directional only; published dataset numbers are out of scope)";
  return rank1_joint >= rank1_wcc && rank1_joint >= rank1_indep &&
         rank1_joint > rank1_rgbhist;
}

bool criterion5_baseline_exactness(std::string& detail) {
  // opponent transform orthonormality
  Matrix t(3, 3);
  const RgbPixel basis[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int j = 0; j < 3; ++j) {
    const ColorVector c = to_opponent(basis[j]);
    t(0, j) = c.c1;
    t(1, j) = c.c2;
    t(2, j) = c.c3;
  }
  const double ortho_err =
      (t.transpose() * t - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff();
  if (ortho_err >= 1e-12) {
    detail = "opponent orthonormality error " + format_real(ortho_err);
    return false;
  }

  // scale invariances over 1000 random (pixel, scale) draws
  Rng rng(41);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const RgbPixel p{0.01 + rng.uniform(), 0.01 + rng.uniform(),
                     0.01 + rng.uniform()};
    const double s = 0.01 + 10.0 * rng.uniform();
    const RgbPixel sp{s * p.r, s * p.g, s * p.b};
    const ColorVector a = l2_correct(p);
    const ColorVector b = l2_correct(sp);
    worst = std::max({worst, std::abs(a.c1 - b.c1), std::abs(a.c2 - b.c2),
                      std::abs(a.c3 - b.c3)});
    const ColorVector ra = to_rg(p);
    const ColorVector rb = to_rg(sp);
    worst = std::max({worst, std::abs(ra.c1 - rb.c1), std::abs(ra.c2 - rb.c2)});
  }
  if (worst >= 1e-12) {
    detail = "scale-invariance deviation " + format_real(worst);
    return false;
  }

  // signature dimensions
  Rng img_rng(42);
  FeatureMap rgb_img(8, 8, 3);
  for (double& v : rgb_img.data()) v = img_rng.uniform();
  BlockHistogramSpec rgb_spec;
  rgb_spec.ranges = default_ranges(ColorSpaceTag::rgb);
  const std::size_t rgb_dims = block_histogram(rgb_img, rgb_spec).size();

  FeatureMap rg_img(8, 8, 2);
  for (double& v : rg_img.data()) v = 0.5 * img_rng.uniform();
  BlockHistogramSpec rg_spec;
  rg_spec.bins_per_channel = 16;
  rg_spec.channels = 2;
  rg_spec.ranges = default_ranges(ColorSpaceTag::rg);
  const std::size_t rg_dims = block_histogram(rg_img, rg_spec).size();

  detail = "orthonormality " + format_real(ortho_err) + ", invariance " +
           format_real(worst) + ", dims " + std::to_string(rgb_dims) + "/" +
           std::to_string(rg_dims);
  return rgb_dims == 216 && rg_dims == 256;
}

bool criterion6_histogram_oracle(std::string& detail) {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    FeatureMap img(16, 16, 3);
    for (double& v : img.data()) v = rng.uniform();
    BlockHistogramSpec spec;
    spec.normalize = trial % 2 == 0;
    spec.ranges = default_ranges(ColorSpaceTag::rgb);

    const ImageSignature fast = block_histogram(img, spec);

    // naive per-pixel double loop
    const BlockGrid grid = count_blocks(16, 16, spec);
    const int bins = spec.bins_per_block();
    ImageSignature naive(static_cast<std::size_t>(grid.count()) * bins, 0.0);
    std::size_t block = 0;
    for (int by = 0; by < grid.ny; ++by)
      for (int bx = 0; bx < grid.nx; ++bx, ++block) {
        for (int y = by * spec.stride; y < by * spec.stride + spec.block_size;
             ++y)
          for (int x = bx * spec.stride;
               x < bx * spec.stride + spec.block_size; ++x) {
            int idx = 0;
            for (int c = 0; c < 3; ++c) {
              const double v = img.at(x, y, c);
              int bin = v <= 0.0 ? 0
                        : v >= 1.0
                            ? spec.bins_per_channel - 1
                            : std::min(spec.bins_per_channel - 1,
                                       static_cast<int>(
                                           v * spec.bins_per_channel));
              idx = idx * spec.bins_per_channel + bin;
            }
            naive[block * bins + idx] += 1.0;
          }
        if (spec.normalize)
          for (int i = 0; i < bins; ++i)
            naive[block * bins + i] /= 64.0;
      }
    if (fast != naive) {
      detail = "mismatch on trial " + std::to_string(trial);
      return false;
    }
  }
  detail = "exact equality on 100 random 16x16 images";
  return true;
}

bool criterion7_cmc_sanity(std::string& detail) {
  const int g = 50;
  Rng rng(61);
  std::vector<int> labels(g);
  for (int i = 0; i < g; ++i) labels[static_cast<std::size_t>(i)] = i;

  double rank1_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix d = Matrix::NullaryExpr(g, g, [&] { return rng.uniform(); });
    const CmcCurve curve = cmc(d, labels, labels);
    rank1_sum += curve.values.front();
    for (std::size_t i = 1; i < curve.values.size(); ++i)
      if (curve.values[i] < curve.values[i - 1]) {
        detail = "curve decreased on trial " + std::to_string(trial);
        return false;
      }
  }
  const double chance = rank1_sum / 200.0;

  Matrix perfect = Matrix::Constant(g, g, 1.0);
  for (int i = 0; i < g; ++i) perfect(i, i) = 0.0;
  const double perfect_rank1 = cmc(perfect, labels, labels).values.front();

  detail = "chance rank-1 " + format_real(chance) + " (expect 0.02 +/- 0.04), "
           "perfect rank-1 " + format_real(perfect_rank1);
  return std::abs(chance - 1.0 / g) <= 0.04 && perfect_rank1 == 1.0;
}

bool criterion8_geometry(std::string& detail) {
  Rng rng(71);
  ModelParams params;
  params.w1 = gaussian(3, 60, rng, 0.3);
  params.b1 = gaussian(60, 1, rng, 0.1);
  params.w2 = gaussian(60, 3, rng, 0.3);
  params.b2 = gaussian(3, 1, rng, 0.1);
  params.dict = gaussian(60, 250, rng, 0.3);
  for (Eigen::Index j = 0; j < 250; ++j) params.dict.col(j).normalize();
  HyperParams hp;
  hp.h = 60;
  hp.d = 250;
  hp.lbfgs_iters = 5;  // geometry only; convergence is irrelevant here

  FeatureMap img(128, 48, 3);
  for (double& v : img.data()) v = rng.uniform();
  const FeatureMap codes = encode_image(params, hp, correct_image(img));
  const FeatureMap pooled = max_pool(codes, 2);

  BlockHistogramSpec spec;
  spec.ranges = default_ranges(ColorSpaceTag::rgb);
  const BlockGrid grid = count_blocks(128, 48, spec);
  int brute = 0;
  for (int y = 0; y + spec.block_size <= 48; y += spec.stride)
    for (int x = 0; x + spec.block_size <= 128; x += spec.stride) ++brute;

  detail = "code map " + std::to_string(codes.width()) + "x" +
           std::to_string(codes.height()) + "x" + std::to_string(codes.depth()) +
           ", pooled " + std::to_string(pooled.width()) + "x" +
           std::to_string(pooled.height()) + "x" +
           std::to_string(pooled.depth()) + ", blocks " +
           std::to_string(grid.count()) + " (brute force " +
           std::to_string(brute) + ")";
  return codes.width() == 128 && codes.height() == 48 && codes.depth() == 250 &&
         pooled.width() == 64 && pooled.height() == 24 &&
         pooled.depth() == 250 && grid.count() == 341 && brute == 341;
}

bool criterion9_pipeline_determinism(std::string& detail) {
  const fs::path base = fs::temp_directory_path() /
                        ("chroma_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);

  const std::string scene =
      "n_identities=6\ntrain_identities=5\ncolors_per_identity=3\n"
      "illuminant_b_r=1.5\nilluminant_b_g=1.0\nilluminant_b_b=0.7\n"
      "sigma_gain=0.03\nsigma_noise=0.01\nwidth=12\nheight=16\nseed=7\n";
  const std::string train_flags =
      "--h 5 --d 8 --m 250 --lbfgs-iters 10 --outer-iters 2 --seed 3";

  for (const char* run : {"run1", "run2"}) {
    const fs::path dir = base / run;
    fs::create_directories(dir);
    write_text_file((dir / "scene.cfg").string(), scene);
    if (run_cli("synth --spec scene.cfg --out data", dir) != 0 ||
        run_cli("train --annotations data/annotations.csv --out model.json " +
                    train_flags,
                dir) != 0 ||
        run_cli("encode --model model.json --images data/probe_images.csv "
                "--out probe_sigs.csv",
                dir) != 0 ||
        run_cli("encode --model model.json --images data/gallery_images.csv "
                "--out gallery_sigs.csv",
                dir) != 0 ||
        run_cli("eval --probe probe_sigs.csv --gallery gallery_sigs.csv "
                "--labels data/labels.csv --out cmc.csv",
                dir) != 0) {
      detail = std::string("pipeline failed in ") + run;
      return false;
    }
  }

  const std::vector<std::string> artifacts = {
      "data/annotations.csv", "data/labels.csv",     "data/probe_images.csv",
      "data/train/a_000.ppm", "data/probe/p_000.ppm", "data/synth.config",
      "model.json",           "model.report.csv",    "model.json.config",
      "probe_sigs.csv",       "gallery_sigs.csv",    "cmc.csv",
      "cmc.ranking.csv",      "cmc.csv.config"};
  for (const auto& rel : artifacts) {
    if (slurp(base / "run1" / rel) != slurp(base / "run2" / rel)) {
      detail = rel + " differs between reruns";
      return false;
    }
  }
  fs::remove_all(base);
  detail = std::to_string(artifacts.size()) +
           " artifacts byte-identical across reruns";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = fs::absolute(argv[1]).string();

  struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "analytic gradients match central finite differences",
       criterion1_gradients},
      {2, "block-coordinate descent never increases the loss",
       criterion2_descent},
      {3, "joint training halves held-out cross-view code distance",
       criterion3_invariance_gain},
      {4, "rank-1 ordering: joint >= wcc, joint >= independent, joint > "
          "rgbhist",
       criterion4_ablation_ordering},
      {5, "baseline transforms exact (orthonormality, invariance, dims)",
       criterion5_baseline_exactness},
      {6, "block histograms equal the naive binning oracle",
       criterion6_histogram_oracle},
      {7, "cmc sanity: chance level, perfect ranking, monotone curves",
       criterion7_cmc_sanity},
      {8, "geometry: 128x48xd code map, pooling, 341 blocks",
       criterion8_geometry},
      {9, "synth->train->encode->eval reruns are byte-identical",
       criterion9_pipeline_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (c.id == 9 && g_cli_path.empty()) {
      std::cout << "[FAIL] criterion 9: " << c.name
                << " (CLI binary path not supplied)\n";
      ++failures;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": "
              << c.name << " | " << detail << " [" << format_real(secs)
              << " s]\n";
    if (!ok) ++failures;
  }
  return failures;
}
