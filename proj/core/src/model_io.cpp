#include "koopcheck/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "koopcheck/suite.hpp"

namespace koopcheck {

namespace {

using Json = nlohmann::json;

Json hex_vector(const Vector& v) {
  auto j = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(hexfloat(v[i]));
  return j;
}

Vector parse_hex_vector(const Json& j) {
  if (!j.is_array()) throw ConfigError("model: expected an array of hex-floats");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_hexfloat(j[i].get<std::string>());
  return v;
}

Json hex_complex(Complex z) { return Json::array({hexfloat(z.real()), hexfloat(z.imag())}); }

Complex parse_hex_complex(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("model: expected a [re, im] pair");
  return {parse_hexfloat(j[0].get<std::string>()), parse_hexfloat(j[1].get<std::string>())};
}

EigenSource parse_source(const std::string& s) {
  for (auto e : {EigenSource::discrete, EigenSource::generator, EigenSource::composed, EigenSource::analytic_oracle})
    if (to_string(e) == s) return e;
  throw ConfigError("model: unknown eigenpair source '" + s + "'");
}

}  // namespace

ModelArtifact make_artifact(const FittedModel& fit, const std::string& system_name,
                            const std::string& config_hash) {
  ModelArtifact a;
  a.fit_id = fit.id;
  a.system = system_name;
  a.method = fit.method;
  a.config_hash = config_hash;
  if (fit.discrete) {
    a.matrix = fit.discrete->K;
    a.dt = fit.discrete->dt;
    a.gamma = fit.discrete->gamma;
    a.default_ridge = fit.discrete->default_ridge;
  } else {
    a.matrix = fit.generator->L;
    a.gamma = fit.generator->gamma;
    a.default_ridge = fit.generator->default_ridge;
  }
  a.residual = fit.residual();
  a.holdout_residual = fit.holdout_residual;
  a.region = fit.region;
  a.dictionary = fit.dictionary();
  a.pairs = fit.eigen.pairs;
  return a;
}

Json model_to_json(const ModelArtifact& m) {
  Json j;
  j["schema_version"] = kModelSchemaVersion;
  j["fit_id"] = m.fit_id;
  j["system"] = m.system;
  j["method"] = m.method;
  j["config_hash"] = m.config_hash;
  j["dt"] = hexfloat(m.dt);
  j["gamma"] = hexfloat(m.gamma);
  j["default_ridge"] = m.default_ridge;
  j["residual"] = m.residual;
  j["holdout_residual"] = m.holdout_residual;
  j["region"] = {{"lower", hex_vector(m.region.lower)}, {"upper", hex_vector(m.region.upper)}};
  // row-major
  auto rows = Json::array();
  for (Eigen::Index i = 0; i < m.matrix.rows(); ++i) rows.push_back(hex_vector(m.matrix.row(i).transpose()));
  j["matrix"] = {{"rows", m.matrix.rows()}, {"cols", m.matrix.cols()}, {"data", std::move(rows)}};
  j["dictionary"] = m.dictionary->to_json();
  j["dictionary_hash"] = to_hex64(m.dictionary->hash());
  auto pairs = Json::array();
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    const auto& p = m.pairs[k];
    Json pj;
    pj["index"] = k;
    pj["lambda"] = {{"re", p.lambda.real()}, {"im", p.lambda.imag()}};
    pj["lambda_exact"] = hex_complex(p.lambda);
    if (p.lambda_discrete) {
      pj["lambda_discrete"] = {{"re", p.lambda_discrete->real()}, {"im", p.lambda_discrete->imag()},
                               {"abs", std::abs(*p.lambda_discrete)}};
      pj["lambda_discrete_exact"] = hex_complex(*p.lambda_discrete);
    }
    auto coeffs = Json::array();
    for (Eigen::Index i = 0; i < p.coefficients.size(); ++i) coeffs.push_back(hex_complex(p.coefficients[i]));
    pj["coefficients"] = std::move(coeffs);
    pj["normalization"] = hexfloat(p.normalization);
    pj["source"] = to_string(p.source);
    pj["defective"] = p.defective;
    pj["degenerate"] = p.degenerate;
    pj["label"] = p.label;
    pairs.push_back(std::move(pj));
  }
  j["eigenpairs"] = std::move(pairs);
  return j;
}

ModelArtifact model_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion) throw ConfigError("model: unsupported schema_version");
    ModelArtifact m;
    m.fit_id = j.at("fit_id").get<std::string>();
    m.system = j.at("system").get<std::string>();
    m.method = j.at("method").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.dt = parse_hexfloat(j.at("dt").get<std::string>());
    m.gamma = parse_hexfloat(j.at("gamma").get<std::string>());
    m.default_ridge = j.at("default_ridge").get<bool>();
    m.residual = j.at("residual").get<double>();
    m.holdout_residual = j.at("holdout_residual").get<double>();
    m.region = Box(parse_hex_vector(j.at("region").at("lower")), parse_hex_vector(j.at("region").at("upper")));
    const auto& mj = j.at("matrix");
    const auto rows = mj.at("rows").get<Eigen::Index>();
    const auto cols = mj.at("cols").get<Eigen::Index>();
    const auto& data = mj.at("data");
    if (data.size() != static_cast<std::size_t>(rows)) throw ConfigError("model: matrix row count mismatch");
    m.matrix.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Vector r = parse_hex_vector(data[static_cast<std::size_t>(i)]);
      if (r.size() != cols) throw ConfigError("model: matrix column count mismatch");
      m.matrix.row(i) = r.transpose();
    }
    m.dictionary = std::make_shared<const Dictionary>(Dictionary::from_json(j.at("dictionary")));
    if (static_cast<Eigen::Index>(m.dictionary->size()) != rows || rows != cols)
      throw ConfigError("model: matrix does not match the dictionary size");
    for (const auto& pj : j.at("eigenpairs")) {
      Eigenpair p;
      p.lambda = parse_hex_complex(pj.at("lambda_exact"));
      if (pj.contains("lambda_discrete_exact")) p.lambda_discrete = parse_hex_complex(pj.at("lambda_discrete_exact"));
      const auto& cj = pj.at("coefficients");
      p.coefficients.resize(static_cast<Eigen::Index>(cj.size()));
      for (std::size_t i = 0; i < cj.size(); ++i) p.coefficients[static_cast<Eigen::Index>(i)] = parse_hex_complex(cj[i]);
      if (p.coefficients.size() != rows) throw ConfigError("model: eigenvector length mismatch");
      p.normalization = parse_hexfloat(pj.at("normalization").get<std::string>());
      p.source = parse_source(pj.at("source").get<std::string>());
      p.defective = pj.at("defective").get<bool>();
      p.degenerate = pj.at("degenerate").get<bool>();
      p.label = pj.at("label").get<std::string>();
      p.dictionary = m.dictionary;
      m.pairs.push_back(std::move(p));
    }
    return m;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model: malformed document: ") + e.what());
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename into '" + path + "': " + ec.message());
  }
}

void save_model(const std::string& path, const ModelArtifact& model) {
  write_file_atomic(path, model_to_json(model).dump(2) + "\n");
}

ModelArtifact load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const Json::parse_error& e) {
    throw ConfigError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace koopcheck
