#include "keyrate/model_io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "keyrate/error.hpp"

namespace keyrate {

using nlohmann::json;

nlohmann::json matrix_to_json(const Matrix& a) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) {
    throw Error(ErrorCode::ParseError, name + " must be a non-empty array");
  }
  const auto as_number = [&](const json& v) {
    if (!v.is_number()) throw Error(ErrorCode::ParseError, name + " has a non-numeric entry");
    return v.get<double>();
  };
  if (!j.front().is_array()) {
    Matrix row(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) row(0, static_cast<Eigen::Index>(c)) = as_number(j[c]);
    return row;
  }
  const std::size_t cols = j.front().size();
  if (cols == 0) throw Error(ErrorCode::ParseError, name + " has an empty row");
  Matrix a(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw Error(ErrorCode::DimensionMismatch, name + " rows have unequal lengths");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_number(j[r][c]);
    }
  }
  return a;
}

AnyModel parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& err) {
    throw Error(ErrorCode::ParseError, err.what());
  }
  if (!j.is_object() || !j.contains("sigma_x")) {
    throw Error(ErrorCode::ParseError, "model must be an object with a sigma_x field");
  }
  const Matrix sx = matrix_from_json(j["sigma_x"], "sigma_x");
  const bool general = j.contains("b") || j.contains("e");
  const bool aligned = j.contains("sigma_wy") || j.contains("sigma_wz");
  if (general == aligned) {
    throw Error(ErrorCode::ParseError, "model needs either (b, e) or (sigma_wy, sigma_wz)");
  }
  if (general) {
    if (!j.contains("b") || !j.contains("e")) throw Error(ErrorCode::ParseError, "general model needs b and e");
    return GeneralModel(sx, matrix_from_json(j["b"], "b"), matrix_from_json(j["e"], "e"));
  }
  if (!j.contains("sigma_wy") || !j.contains("sigma_wz")) {
    throw Error(ErrorCode::ParseError, "aligned model needs sigma_wy and sigma_wz");
  }
  return AlignedModel(sx, matrix_from_json(j["sigma_wy"], "sigma_wy"), matrix_from_json(j["sigma_wz"], "sigma_wz"));
}

AnyModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string canonical_json(const GeneralModel& m) {
  json j;
  j["sigma_x"] = matrix_to_json(m.sigma_x().matrix());
  j["b"] = matrix_to_json(m.b());
  j["e"] = matrix_to_json(m.e());
  return j.dump();
}

std::string canonical_json(const AlignedModel& m) {
  json j;
  j["sigma_x"] = matrix_to_json(m.sigma_x().matrix());
  j["sigma_wy"] = matrix_to_json(m.sigma_wy().matrix());
  j["sigma_wz"] = matrix_to_json(m.sigma_wz().matrix());
  return j.dump();
}

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::SolverFailure, "SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string model_digest(const GeneralModel& m) { return sha256_hex(canonical_json(m)); }
std::string model_digest(const AlignedModel& m) { return sha256_hex(canonical_json(m)); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace keyrate
