// chroma: learn illumination-invariant color features across two camera
// views and evaluate them with block-histogram baselines and CMC curves.
//
// Subcommands: synth, train, encode, baseline, eval. Every run writes a
// resolved-config snapshot next to its outputs; all tabular outputs are CSV
// with header rows. Given identical inputs, config and seed, reruns are
// byte-identical.

#include <chroma/csv.hpp>
#include <chroma/data.hpp>
#include <chroma/encode.hpp>
#include <chroma/eval.hpp>
#include <chroma/histogram.hpp>
#include <chroma/model_io.hpp>
#include <chroma/optim.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace chroma;

namespace {

using KvMap = std::map<std::string, std::string>;

void write_snapshot(const std::string& path, const KvMap& kv) {
  std::string out;
  for (const auto& [key, value] : kv) out += key + '=' + value + '\n';
  write_text_file(path, out);
}

// id,path rows; paths are resolved relative to the list file.
struct ImageListEntry {
  std::string id;
  std::string path;
};

std::vector<ImageListEntry> read_image_list(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "id,path")
    throw Error(Errc::invalid_input,
                "image list " + path + " must start with 'id,path'");
  const fs::path base = fs::path(path).parent_path();
  std::vector<ImageListEntry> entries;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 2)
      throw Error(Errc::invalid_input,
                  "image list line " + std::to_string(i + 1) + " malformed");
    entries.push_back({f[0], (base / f[1]).string()});
  }
  return entries;
}

void write_signatures(const std::string& path,
                      const std::vector<std::string>& ids,
                      const std::vector<Vector>& sigs) {
  std::string out = "id,values\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    for (Eigen::Index j = 0; j < sigs[i].size(); ++j)
      out += ',' + format_real(sigs[i](j));
    out += '\n';
  }
  write_text_file(path, out);
}

struct SignatureFile {
  std::vector<std::string> ids;
  std::vector<Vector> sigs;
};

SignatureFile read_signatures(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "id,values")
    throw Error(Errc::invalid_input,
                "signature file " + path + " must start with 'id,values'");
  SignatureFile file;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() < 2)
      throw Error(Errc::invalid_input,
                  "signature line " + std::to_string(i + 1) + " malformed");
    file.ids.push_back(f[0]);
    Vector v(static_cast<Eigen::Index>(f.size()) - 1);
    for (std::size_t j = 1; j < f.size(); ++j)
      v(static_cast<Eigen::Index>(j - 1)) = parse_real(f[j]);
    file.sigs.push_back(std::move(v));
  }
  if (file.ids.empty())
    throw Error(Errc::invalid_input, "signature file " + path + " is empty");
  return file;
}

std::map<std::string, int> read_labels(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines.front() != "id,label")
    throw Error(Errc::invalid_input,
                "label file " + path + " must start with 'id,label'");
  std::map<std::string, int> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 2)
      throw Error(Errc::invalid_input,
                  "label line " + std::to_string(i + 1) + " malformed");
    labels[f[0]] = static_cast<int>(parse_int(f[1]));
  }
  return labels;
}

std::string real_kv(double v) { return format_real(v); }

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              long seed_override) {
  SyntheticSceneSpec spec;
  if (!spec_path.empty()) spec = scene_spec_from_kv(parse_kv_file(spec_path));
  if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);

  const SyntheticDataset ds = generate_synthetic(spec);

  const fs::path out(out_dir);
  fs::create_directories(out / "train");
  fs::create_directories(out / "probe");
  fs::create_directories(out / "gallery");

  for (std::size_t i = 0; i < ds.train_a.size(); ++i) {
    write_ppm((out / ds.annotations[i * spec.patches_per_identity].image_a)
                  .string(),
              ds.train_a[i]);
    write_ppm((out / ds.annotations[i * spec.patches_per_identity].image_b)
                  .string(),
              ds.train_b[i]);
  }
  write_text_file((out / "annotations.csv").string(),
                  annotations_to_csv(ds.annotations));

  std::string labels = "id,label\n";
  std::string probe_list = "id,path\n";
  std::string gallery_list = "id,path\n";
  for (std::size_t i = 0; i < ds.probe_images.size(); ++i) {
    const std::string rel = "probe/" + ds.probe_ids[i] + ".ppm";
    write_ppm((out / rel).string(), ds.probe_images[i]);
    labels += ds.probe_ids[i] + ',' + std::to_string(ds.probe_labels[i]) + '\n';
    probe_list += ds.probe_ids[i] + ',' + rel + '\n';
  }
  for (std::size_t i = 0; i < ds.gallery_images.size(); ++i) {
    const std::string rel = "gallery/" + ds.gallery_ids[i] + ".ppm";
    write_ppm((out / rel).string(), ds.gallery_images[i]);
    labels +=
        ds.gallery_ids[i] + ',' + std::to_string(ds.gallery_labels[i]) + '\n';
    gallery_list += ds.gallery_ids[i] + ',' + rel + '\n';
  }
  write_text_file((out / "labels.csv").string(), labels);
  write_text_file((out / "probe_images.csv").string(), probe_list);
  write_text_file((out / "gallery_images.csv").string(), gallery_list);

  KvMap kv;
  kv["subcommand"] = "synth";
  kv["n_identities"] = std::to_string(spec.n_identities);
  kv["colors_per_identity"] = std::to_string(spec.colors_per_identity);
  kv["illuminant_a_r"] = real_kv(spec.illuminant_a[0]);
  kv["illuminant_a_g"] = real_kv(spec.illuminant_a[1]);
  kv["illuminant_a_b"] = real_kv(spec.illuminant_a[2]);
  kv["illuminant_b_r"] = real_kv(spec.illuminant_b[0]);
  kv["illuminant_b_g"] = real_kv(spec.illuminant_b[1]);
  kv["illuminant_b_b"] = real_kv(spec.illuminant_b[2]);
  kv["sigma_gain"] = real_kv(spec.sigma_gain);
  kv["sigma_noise"] = real_kv(spec.sigma_noise);
  kv["seed"] = std::to_string(spec.seed);
  kv["width"] = std::to_string(spec.width);
  kv["height"] = std::to_string(spec.height);
  kv["train_identities"] = std::to_string(spec.train_identities);
  kv["patches_per_identity"] = std::to_string(spec.patches_per_identity);
  write_snapshot((out / "synth.config").string(), kv);

  std::cout << "synth: wrote " << ds.train_a.size()
            << " training image pairs (" << ds.annotations.size()
            << " patch pairs) and " << ds.probe_images.size()
            << " probe/gallery pairs to " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string annotations;
  std::string out;
  std::string config;
  std::string mode = "joint";
  int layers = 1;
  long seed = 7;
  long m = 10000;
  long m2 = 2000;
  HyperParams hyper;
};

void apply_hyper_kv(HyperParams& hp, const KvMap& kv, TrainArgs& args) {
  for (const auto& [key, value] : kv) {
    if (key == "beta") hp.beta = parse_real(value);
    else if (key == "gamma") hp.gamma = parse_real(value);
    else if (key == "lambda") hp.lambda = parse_real(value);
    else if (key == "rho") hp.rho = parse_real(value);
    else if (key == "eta") hp.eta = parse_real(value);
    else if (key == "delta") hp.delta = parse_real(value);
    else if (key == "h") hp.h = static_cast<int>(parse_int(value));
    else if (key == "d") hp.d = static_cast<int>(parse_int(value));
    else if (key == "lbfgs_iters") hp.lbfgs_iters = static_cast<int>(parse_int(value));
    else if (key == "outer_iters") hp.outer_iters = static_cast<int>(parse_int(value));
    else if (key == "tol") hp.tol = parse_real(value);
    else if (key == "m") args.m = parse_int(value);
    else if (key == "m2") args.m2 = parse_int(value);
    else if (key == "seed") args.seed = parse_int(value);
    else if (key == "mode") args.mode = value;
    else if (key == "layers") args.layers = static_cast<int>(parse_int(value));
    else throw Error(Errc::invalid_input, "unknown hyper key '" + key + "'");
  }
}

KvMap train_kv(const TrainArgs& args) {
  const HyperParams& hp = args.hyper;
  KvMap kv;
  kv["subcommand"] = "train";
  kv["mode"] = args.mode;
  kv["layers"] = std::to_string(args.layers);
  kv["seed"] = std::to_string(args.seed);
  kv["m"] = std::to_string(args.m);
  kv["m2"] = std::to_string(args.m2);
  kv["beta"] = real_kv(hp.beta);
  kv["gamma"] = real_kv(hp.gamma);
  kv["lambda"] = real_kv(hp.lambda);
  kv["rho"] = real_kv(hp.rho);
  kv["eta"] = real_kv(hp.eta);
  kv["delta"] = real_kv(hp.delta);
  kv["h"] = std::to_string(hp.h);
  kv["d"] = std::to_string(hp.d);
  kv["lbfgs_iters"] = std::to_string(hp.lbfgs_iters);
  kv["outer_iters"] = std::to_string(hp.outer_iters);
  kv["tol"] = real_kv(hp.tol);
  return kv;
}

TrainMode mode_from_name(const std::string& name) {
  if (name == "joint") return TrainMode::joint;
  if (name == "independent") return TrainMode::independent;
  if (name == "wcc") return TrainMode::wcc;
  throw Error(Errc::invalid_input, "unknown mode '" + name + "'");
}

int cmd_train(TrainArgs& args) {
  const TrainMode mode = mode_from_name(args.mode);
  if (args.layers != 1 && args.layers != 2)
    throw Error(Errc::invalid_input, "--layers must be 1 or 2");

  const std::vector<PatchPair> pairs = load_patch_pairs(args.annotations);
  const std::uint64_t seed = static_cast<std::uint64_t>(args.seed);

  ModelFile model;
  model.hyper = args.hyper;
  TrainReport report1;
  TrainReport report2;
  if (args.layers == 1) {
    const PixelBatchPair batch =
        sample_pixel_pairs(pairs, args.m, Rng(seed).split(10).next_u64());
    auto [params, report] =
        train(batch, args.hyper, mode, Rng(seed).split(11).next_u64());
    model.layers.push_back(std::move(params));
    report1 = std::move(report);
  } else {
    TwoLayerTraining two =
        train_two_layer(pairs, args.hyper, mode, seed, args.m, args.m2);
    model.layers.push_back(std::move(two.stack.layer1));
    model.layers.push_back(std::move(two.stack.layer2));
    report1 = std::move(two.report1);
    report2 = std::move(two.report2);
  }

  write_model(args.out, model);
  const std::string report_path =
      fs::path(args.out).replace_extension(".report.csv").string();
  write_text_file(report_path, report_to_csv(report1));
  if (args.layers == 2)
    write_text_file(
        fs::path(args.out).replace_extension(".report2.csv").string(),
        report_to_csv(report2));
  write_snapshot(args.out + ".config", train_kv(args));

  std::cout << "train: mode=" << args.mode << " layers=" << args.layers
            << " outer_iters=" << report1.outer_iters_used
            << " converged=" << (report1.converged ? "yes" : "no")
            << " final_total=" << format_real(report1.trace.back().total)
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// encode

int cmd_encode(const std::string& model_path, const std::string& list_path,
               int layers, const std::string& out_path) {
  const ModelFile model = read_model(model_path);
  if (layers < 1 || layers > static_cast<int>(model.layers.size()))
    throw Error(Errc::invalid_input,
                "--layers " + std::to_string(layers) + " but model holds " +
                    std::to_string(model.layers.size()));

  const auto entries = read_image_list(list_path);
  if (entries.empty())
    throw Error(Errc::invalid_input, "image list is empty");

  std::vector<std::string> ids;
  std::vector<Vector> sig1(entries.size());
  std::vector<Vector> sig2(entries.size());
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ids.push_back(entries[i].id);
    const FeatureMap img =
        correct_image(load_image(entries[i].path), &degenerate);
    if (layers == 1) {
      sig1[i] = encode_signature(model.layers[0], model.hyper, img);
    } else {
      LayerStack stack{model.layers[0], model.layers[1]};
      auto [s1, s2] = encode_two_layer(stack, model.hyper, img);
      sig1[i] = std::move(s1);
      sig2[i] = std::move(s2);
    }
  }
  if (degenerate > 0)
    warn("cli", "degenerate-pixels",
         std::to_string(degenerate) + " zero pixels mapped to zero vectors");

  write_signatures(out_path, ids, sig1);
  if (layers == 2) {
    const std::string second =
        fs::path(out_path).replace_extension(".layer2.csv").string();
    write_signatures(second, ids, sig2);
  }

  KvMap kv;
  kv["subcommand"] = "encode";
  kv["model"] = model_path;
  kv["images"] = list_path;
  kv["layers"] = std::to_string(layers);
  write_snapshot(out_path + ".config", kv);

  std::cout << "encode: " << entries.size() << " images, layer-1 dim "
            << sig1.front().size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineChoice {
  bool correct = false;
  ColorSpaceTag space = ColorSpaceTag::rgb;
  int default_bins = 6;
};

BaselineChoice baseline_from_name(const std::string& name) {
  if (name == "rgb") return {false, ColorSpaceTag::rgb, 6};
  if (name == "hsv") return {false, ColorSpaceTag::hsv, 6};
  if (name == "yuv") return {false, ColorSpaceTag::yuv, 6};
  if (name == "crgb") return {true, ColorSpaceTag::corrected_rgb, 6};
  if (name == "chsv") return {true, ColorSpaceTag::hsv, 6};
  if (name == "cyuv") return {true, ColorSpaceTag::yuv, 6};
  if (name == "rg") return {true, ColorSpaceTag::rg, 16};
  if (name == "opponent") return {false, ColorSpaceTag::opponent, 6};
  if (name == "cspace") return {false, ColorSpaceTag::cspace, 6};
  throw Error(Errc::invalid_input, "unknown color space '" + name + "'");
}

int cmd_baseline(const std::string& space_name, const std::string& list_path,
                 const std::string& out_path, int block, int stride, int bins,
                 bool normalize) {
  const BaselineChoice choice = baseline_from_name(space_name);
  const auto entries = read_image_list(list_path);
  if (entries.empty())
    throw Error(Errc::invalid_input, "image list is empty");

  std::size_t degenerate = 0;
  std::vector<FeatureMap> converted;
  converted.reserve(entries.size());
  for (const auto& e : entries) {
    FeatureMap img = load_image(e.path);
    if (choice.correct) img = correct_image(img, &degenerate);
    converted.push_back(convert_image(img, choice.space, &degenerate));
  }

  BlockHistogramSpec spec;
  spec.block_size = block;
  spec.stride = stride;
  spec.bins_per_channel = bins > 0 ? bins : choice.default_bins;
  spec.channels = channel_count(choice.space);
  spec.normalize = normalize;
  spec.ranges = choice.space == ColorSpaceTag::cspace
                    ? compute_value_ranges(converted)
                    : default_ranges(choice.space);

  std::vector<std::string> ids;
  std::vector<Vector> sigs;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ids.push_back(entries[i].id);
    const ImageSignature sig = block_histogram(converted[i], spec);
    sigs.push_back(Eigen::Map<const Vector>(
        sig.data(), static_cast<Eigen::Index>(sig.size())));
  }
  if (degenerate > 0)
    warn("cli", "degenerate-pixels",
         std::to_string(degenerate) + " zero pixels mapped to zero vectors");
  write_signatures(out_path, ids, sigs);

  KvMap kv;
  kv["subcommand"] = "baseline";
  kv["space"] = space_name;
  kv["images"] = list_path;
  kv["block_size"] = std::to_string(spec.block_size);
  kv["stride"] = std::to_string(spec.stride);
  kv["bins_per_channel"] = std::to_string(spec.bins_per_channel);
  kv["normalize"] = spec.normalize ? "1" : "0";
  write_snapshot(out_path + ".config", kv);

  std::cout << "baseline: space=" << space_name << " signature dim "
            << sigs.front().size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string probe;
  std::string gallery;
  std::string probe2;
  std::string gallery2;
  std::string labels;
  std::string out;
  std::string metric = "euclidean";
  bool multishot = false;
  double w1 = 0.5;
  double w2 = 0.5;
};

int cmd_eval(const EvalArgs& args) {
  const DistanceMetric metric = metric_from_name(args.metric);
  const SignatureFile probe = read_signatures(args.probe);
  const SignatureFile gallery = read_signatures(args.gallery);
  const auto label_map = read_labels(args.labels);

  auto labels_for = [&](const std::vector<std::string>& ids) {
    std::vector<int> out;
    for (const auto& id : ids) {
      const auto it = label_map.find(id);
      if (it == label_map.end())
        throw Error(Errc::invalid_input, "no label for id '" + id + "'");
      out.push_back(it->second);
    }
    return out;
  };
  const std::vector<int> probe_labels = labels_for(probe.ids);
  const std::vector<int> gallery_labels = labels_for(gallery.ids);

  Matrix dist = distance_matrix(probe.sigs, gallery.sigs, metric);
  if (!args.probe2.empty() != !args.gallery2.empty())
    throw Error(Errc::invalid_input,
                "--probe2 and --gallery2 must be given together");
  if (!args.probe2.empty()) {
    const SignatureFile p2 = read_signatures(args.probe2);
    const SignatureFile g2 = read_signatures(args.gallery2);
    if (p2.ids != probe.ids || g2.ids != gallery.ids)
      throw Error(Errc::invalid_input,
                  "layer-2 signature ids do not match layer-1 ids");
    const Matrix d2 = distance_matrix(p2.sigs, g2.sigs, metric);
    dist = combine_scores(dist, d2, args.w1, args.w2);
  }

  const CmcCurve curve = args.multishot
                             ? multishot_cmc(dist, probe_labels, gallery_labels)
                             : cmc(dist, probe_labels, gallery_labels);
  write_text_file(args.out, curve.to_csv());

  // full per-probe ranking table next to the curve
  std::string ranking = "probe_id,rank,gallery_id,distance\n";
  std::vector<Eigen::Index> order(gallery.ids.size());
  for (Eigen::Index p = 0; p < dist.rows(); ++p) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                       return dist(p, a) < dist(p, b);
                     });
    for (std::size_t k = 0; k < order.size(); ++k)
      ranking += probe.ids[static_cast<std::size_t>(p)] + ',' +
                 std::to_string(k + 1) + ',' +
                 gallery.ids[static_cast<std::size_t>(order[k])] + ',' +
                 format_real(dist(p, order[k])) + '\n';
  }
  write_text_file(fs::path(args.out).replace_extension(".ranking.csv").string(),
                  ranking);

  KvMap kv;
  kv["subcommand"] = "eval";
  kv["probe"] = args.probe;
  kv["gallery"] = args.gallery;
  kv["probe2"] = args.probe2;
  kv["gallery2"] = args.gallery2;
  kv["labels"] = args.labels;
  kv["metric"] = args.metric;
  kv["multishot"] = args.multishot ? "1" : "0";
  kv["w1"] = real_kv(args.w1);
  kv["w2"] = real_kv(args.w2);
  write_snapshot(args.out + ".config", kv);

  auto rate = [&](std::size_t rank) {
    return curve.values.empty()
               ? 0.0
               : curve.values[std::min(rank, curve.values.size()) - 1];
  };
  std::cout << "eval: rank1=" << format_real(rate(1))
            << " rank5=" << format_real(rate(5))
            << " rank10=" << format_real(rate(10))
            << " rank20=" << format_real(rate(20)) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"illumination-invariant color feature learning and evaluation"};
  app.require_subcommand(1);
  // long-form help only; -h/--h stays available for the lifted dimension
  app.set_help_flag("--help", "print help");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec;
  std::string synth_out;
  long synth_seed = -1;
  synth->add_option("--spec", synth_spec, "scene spec file (key=value)");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", synth_seed, "override scene seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->set_help_flag("--help", "print help");
  TrainArgs targs;
  bool flag_used[16] = {};
  double f_beta = 0, f_gamma = 0, f_lambda = 0, f_rho = 0, f_eta = 0,
         f_delta = 0, f_tol = 0;
  long f_h = 0, f_d = 0, f_lbfgs = 0, f_outer = 0, f_m = 0, f_m2 = 0,
       f_seed = 0;
  train_cmd->add_option("--annotations", targs.annotations, "annotation CSV")
      ->required();
  train_cmd->add_option("--out", targs.out, "model file to write")->required();
  train_cmd->add_option("--config", targs.config, "hyper config (key=value)");
  train_cmd->add_option("--mode", targs.mode, "joint|independent|wcc");
  train_cmd->add_option("--layers", targs.layers, "1 or 2");
  train_cmd->add_option("--seed", f_seed, "training seed")
      ->each([&](const std::string&) { flag_used[0] = true; });
  train_cmd->add_option("--m", f_m, "pixel correspondences to sample")
      ->each([&](const std::string&) { flag_used[1] = true; });
  train_cmd->add_option("--m2", f_m2, "layer-2 cell correspondences")
      ->each([&](const std::string&) { flag_used[2] = true; });
  train_cmd->add_option("--beta", f_beta, "sparse-coding weight")
      ->each([&](const std::string&) { flag_used[3] = true; });
  train_cmd->add_option("--gamma", f_gamma, "cross-view weight")
      ->each([&](const std::string&) { flag_used[4] = true; });
  train_cmd->add_option("--lambda", f_lambda, "encoder decay")
      ->each([&](const std::string&) { flag_used[5] = true; });
  train_cmd->add_option("--rho", f_rho, "dictionary decay")
      ->each([&](const std::string&) { flag_used[6] = true; });
  train_cmd->add_option("--eta", f_eta, "sparsity weight")
      ->each([&](const std::string&) { flag_used[7] = true; });
  train_cmd->add_option("--delta", f_delta, "L1 smoothing constant")
      ->each([&](const std::string&) { flag_used[8] = true; });
  train_cmd->add_option("--h", f_h, "lifted dimension")
      ->each([&](const std::string&) { flag_used[9] = true; });
  train_cmd->add_option("--d", f_d, "dictionary atoms")
      ->each([&](const std::string&) { flag_used[10] = true; });
  train_cmd->add_option("--lbfgs-iters", f_lbfgs, "inner iterations per phase")
      ->each([&](const std::string&) { flag_used[11] = true; });
  train_cmd->add_option("--outer-iters", f_outer, "alternation rounds")
      ->each([&](const std::string&) { flag_used[12] = true; });
  train_cmd->add_option("--tol", f_tol, "convergence tolerance")
      ->each([&](const std::string&) { flag_used[13] = true; });

  // encode
  auto* encode_cmd = app.add_subcommand("encode", "encode images with a model");
  std::string enc_model, enc_list, enc_out;
  int enc_layers = 1;
  encode_cmd->add_option("--model", enc_model, "model file")->required();
  encode_cmd->add_option("--images", enc_list, "image list CSV (id,path)")
      ->required();
  encode_cmd->add_option("--layers", enc_layers, "1 or 2");
  encode_cmd->add_option("--out", enc_out, "signature CSV to write")
      ->required();

  // baseline
  auto* base_cmd =
      app.add_subcommand("baseline", "block-histogram baseline signatures");
  std::string base_space, base_list, base_out;
  int base_block = 8, base_stride = 4, base_bins = 0;
  bool base_no_normalize = false;
  base_cmd
      ->add_option("--space", base_space,
                   "rgb|hsv|yuv|crgb|chsv|cyuv|rg|opponent|cspace")
      ->required();
  base_cmd->add_option("--images", base_list, "image list CSV (id,path)")
      ->required();
  base_cmd->add_option("--out", base_out, "signature CSV to write")->required();
  base_cmd->add_option("--block", base_block, "block size in pixels");
  base_cmd->add_option("--stride", base_stride, "block stride in pixels");
  base_cmd->add_option("--bins", base_bins, "bins per channel (0 = default)");
  base_cmd->add_flag("--no-normalize", base_no_normalize,
                     "keep raw per-block counts");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "rank and report CMC");
  EvalArgs eargs;
  eval_cmd->add_option("--probe", eargs.probe, "probe signatures")->required();
  eval_cmd->add_option("--gallery", eargs.gallery, "gallery signatures")
      ->required();
  eval_cmd->add_option("--probe2", eargs.probe2, "layer-2 probe signatures");
  eval_cmd->add_option("--gallery2", eargs.gallery2,
                       "layer-2 gallery signatures");
  eval_cmd->add_option("--labels", eargs.labels, "label CSV (id,label)")
      ->required();
  eval_cmd->add_option("--metric", eargs.metric, "euclidean|cosine");
  eval_cmd->add_flag("--multishot", eargs.multishot,
                     "min-distance reduction per gallery identity");
  eval_cmd->add_option("--w1", eargs.w1, "layer-1 score weight");
  eval_cmd->add_option("--w2", eargs.w2, "layer-2 score weight");
  eval_cmd->add_option("--out", eargs.out, "CMC CSV to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out, synth_seed);
    if (train_cmd->parsed()) {
      const std::string flag_mode = targs.mode;
      const int flag_layers = targs.layers;
      if (!targs.config.empty())
        apply_hyper_kv(targs.hyper, parse_kv_file(targs.config), targs);
      // flags override the config file
      if (train_cmd->count("--mode")) targs.mode = flag_mode;
      if (train_cmd->count("--layers")) targs.layers = flag_layers;
      if (flag_used[0]) targs.seed = f_seed;
      if (flag_used[1]) targs.m = f_m;
      if (flag_used[2]) targs.m2 = f_m2;
      if (flag_used[3]) targs.hyper.beta = f_beta;
      if (flag_used[4]) targs.hyper.gamma = f_gamma;
      if (flag_used[5]) targs.hyper.lambda = f_lambda;
      if (flag_used[6]) targs.hyper.rho = f_rho;
      if (flag_used[7]) targs.hyper.eta = f_eta;
      if (flag_used[8]) targs.hyper.delta = f_delta;
      if (flag_used[9]) targs.hyper.h = static_cast<int>(f_h);
      if (flag_used[10]) targs.hyper.d = static_cast<int>(f_d);
      if (flag_used[11]) targs.hyper.lbfgs_iters = static_cast<int>(f_lbfgs);
      if (flag_used[12]) targs.hyper.outer_iters = static_cast<int>(f_outer);
      if (flag_used[13]) targs.hyper.tol = f_tol;
      return cmd_train(targs);
    }
    if (encode_cmd->parsed())
      return cmd_encode(enc_model, enc_list, enc_layers, enc_out);
    if (base_cmd->parsed())
      return cmd_baseline(base_space, base_list, base_out, base_block,
                          base_stride, base_bins, !base_no_normalize);
    if (eval_cmd->parsed()) return cmd_eval(eargs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
