#include "qfedtd/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qfedtd/error.hpp"
#include "qfedtd/io_util.hpp"

namespace qfedtd {

namespace {

void append_number(std::string& out, double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out += buf;
}

void append_matrix(std::string& out, const Matrix& M) {
  out += '[';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (i) out += ',';
    out += '[';
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) out += ',';
      append_number(out, M(i, j));
    }
    out += ']';
  }
  out += ']';
}

Matrix read_matrix(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorKind::ConfigError, std::string(name) + " must be a nested array");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorKind::BadDims, std::string(name) + " rows have unequal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

}  // namespace

std::string model_to_json(const Model& model) {
  std::string out = "{\"n\":" + std::to_string(model.mrp.n()) +
                    ",\"m\":" + std::to_string(model.features.m()) + ",\"gamma\":";
  append_number(out, model.mrp.gamma);
  out += ",\"P\":";
  append_matrix(out, model.mrp.P);
  out += ",\"R\":[";
  for (Eigen::Index i = 0; i < model.mrp.R.size(); ++i) {
    if (i) out += ',';
    append_number(out, model.mrp.R(i));
  }
  out += "],\"Phi\":";
  append_matrix(out, model.features.Phi);
  out += "}\n";
  return out;
}

Model model_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    for (const char* key : {"n", "m", "gamma", "P", "R", "Phi"}) {
      if (!doc.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing field ") + key);
    }
    const auto n = doc.at("n").get<std::size_t>();
    const auto m = doc.at("m").get<std::size_t>();
    Matrix P = read_matrix(doc.at("P"), "P");
    Matrix Phi = read_matrix(doc.at("Phi"), "Phi");
    const auto& r = doc.at("R");
    Vector R(static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) R(static_cast<Eigen::Index>(i)) = r[i].get<double>();
    if (static_cast<std::size_t>(P.rows()) != n || static_cast<std::size_t>(Phi.cols()) != m) {
      throw Error(ErrorKind::BadDims, "declared n/m disagree with array shapes");
    }
    Model model{validate_mrp(std::move(P), std::move(R), doc.at("gamma").get<double>()),
                validate_features(std::move(Phi))};
    if (model.features.n() != model.mrp.n()) {
      throw Error(ErrorKind::BadDims, "Phi must have one row per state");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("model document: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  write_file_atomically(path, model_to_json(model));
}

Model load_model(const std::filesystem::path& path) {
  return model_from_json(read_file(path));
}

}  // namespace qfedtd
