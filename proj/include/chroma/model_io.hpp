// Versioned, portable model file: a JSON document with `format_version`, an
// ordered `layers` list (each layer holds h, d and row-major arrays w1, b1,
// w2, b2, dict) and a `hyperparams` record. Reals are written with 17
// significant digits so deserialization reproduces every double bit-exactly.
// The layer input dimension is implied: in_dim = len(w1) / h.

#pragma once

#include <chroma/csv.hpp>
#include <chroma/types.hpp>

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

namespace chroma {

inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  std::vector<ModelParams> layers;
  HyperParams hyper;
};

namespace detail {

inline void append_array_row_major(std::string& out, const Matrix& m) {
  out += '[';
  bool first = true;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!first) out += ',';
      first = false;
      out += format_real(m(i, j));
    }
  out += ']';
}

inline void append_array(std::string& out, const Vector& v) {
  out += '[';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_real(v(i));
  }
  out += ']';
}

inline Matrix matrix_from_row_major(const nlohmann::json& arr,
                                    Eigen::Index rows, Eigen::Index cols,
                                    const std::string& name) {
  if (!arr.is_array() ||
      static_cast<Eigen::Index>(arr.size()) != rows * cols)
    throw Error(Errc::invalid_input,
                "model field '" + name + "' must hold " +
                    std::to_string(rows * cols) + " numbers");
  Matrix m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = arr[static_cast<std::size_t>(k++)].get<double>();
  return m;
}

inline Vector vector_from(const nlohmann::json& arr, Eigen::Index size,
                          const std::string& name) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != size)
    throw Error(Errc::invalid_input, "model field '" + name + "' must hold " +
                                         std::to_string(size) + " numbers");
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i)
    v(i) = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace detail

inline std::string model_to_string(const ModelFile& model) {
  for (const auto& layer : model.layers) {
    const ValidationResult v = validate_model(layer);
    if (!v.ok) throw Error(v.code, "refusing to serialize: " + v.message);
  }
  const HyperParams& hp = model.hyper;
  std::string out;
  out += "{\n";
  out += "  \"format_version\": " + std::to_string(kModelFormatVersion) + ",\n";
  out += "  \"hyperparams\": {\n";
  out += "    \"beta\": " + format_real(hp.beta) + ",\n";
  out += "    \"gamma\": " + format_real(hp.gamma) + ",\n";
  out += "    \"lambda\": " + format_real(hp.lambda) + ",\n";
  out += "    \"rho\": " + format_real(hp.rho) + ",\n";
  out += "    \"eta\": " + format_real(hp.eta) + ",\n";
  out += "    \"delta\": " + format_real(hp.delta) + ",\n";
  out += "    \"h\": " + std::to_string(hp.h) + ",\n";
  out += "    \"d\": " + std::to_string(hp.d) + ",\n";
  out += "    \"lbfgs_iters\": " + std::to_string(hp.lbfgs_iters) + ",\n";
  out += "    \"outer_iters\": " + std::to_string(hp.outer_iters) + ",\n";
  out += "    \"tol\": " + format_real(hp.tol) + "\n";
  out += "  },\n";
  out += "  \"layers\": [\n";
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const ModelParams& p = model.layers[i];
    out += "    {\n";
    out += "      \"h\": " + std::to_string(p.lifted_dim()) + ",\n";
    out += "      \"d\": " + std::to_string(p.atom_count()) + ",\n";
    out += "      \"w1\": ";
    detail::append_array_row_major(out, p.w1);
    out += ",\n      \"b1\": ";
    detail::append_array(out, p.b1);
    out += ",\n      \"w2\": ";
    detail::append_array_row_major(out, p.w2);
    out += ",\n      \"b2\": ";
    detail::append_array(out, p.b2);
    out += ",\n      \"dict\": ";
    detail::append_array_row_major(out, p.dict);
    out += "\n    }";
    out += i + 1 < model.layers.size() ? ",\n" : "\n";
  }
  out += "  ]\n";
  out += "}\n";
  return out;
}

inline void write_model(const std::string& path, const ModelFile& model) {
  write_text_file(path, model_to_string(model));
}

inline ModelFile model_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("format_version") ||
      !doc.contains("layers") || !doc.contains("hyperparams"))
    throw Error(Errc::invalid_input, "not a model file");
  if (doc["format_version"].get<int>() != kModelFormatVersion)
    throw Error(Errc::invalid_input,
                "unsupported model format version " +
                    doc["format_version"].dump());

  ModelFile model;
  const auto& hp = doc["hyperparams"];
  model.hyper.beta = hp.at("beta").get<double>();
  model.hyper.gamma = hp.at("gamma").get<double>();
  model.hyper.lambda = hp.at("lambda").get<double>();
  model.hyper.rho = hp.at("rho").get<double>();
  model.hyper.eta = hp.at("eta").get<double>();
  model.hyper.delta = hp.at("delta").get<double>();
  model.hyper.h = hp.at("h").get<int>();
  model.hyper.d = hp.at("d").get<int>();
  model.hyper.lbfgs_iters = hp.at("lbfgs_iters").get<int>();
  model.hyper.outer_iters = hp.at("outer_iters").get<int>();
  model.hyper.tol = hp.at("tol").get<double>();

  for (const auto& layer : doc["layers"]) {
    const Eigen::Index h = layer.at("h").get<Eigen::Index>();
    const Eigen::Index d = layer.at("d").get<Eigen::Index>();
    if (h < 1 || d < 1)
      throw Error(Errc::invalid_input, "layer h and d must be positive");
    const auto& w1 = layer.at("w1");
    if (!w1.is_array() || w1.size() % static_cast<std::size_t>(h) != 0)
      throw Error(Errc::invalid_input, "w1 length must be a multiple of h");
    const Eigen::Index in_dim =
        static_cast<Eigen::Index>(w1.size()) / h;
    ModelParams p;
    p.w1 = detail::matrix_from_row_major(w1, in_dim, h, "w1");
    p.b1 = detail::vector_from(layer.at("b1"), h, "b1");
    p.w2 = detail::matrix_from_row_major(layer.at("w2"), h, in_dim, "w2");
    p.b2 = detail::vector_from(layer.at("b2"), in_dim, "b2");
    p.dict = detail::matrix_from_row_major(layer.at("dict"), h, d, "dict");
    const ValidationResult v = validate_model(p);
    if (!v.ok) throw Error(v.code, v.message);
    model.layers.push_back(std::move(p));
  }
  if (model.layers.empty())
    throw Error(Errc::invalid_input, "model file holds no layers");
  return model;
}

inline ModelFile read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_input,
                "cannot parse model file " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace chroma
