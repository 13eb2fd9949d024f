#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>
#include "mindpilot/core/error.hpp"

namespace mindpilot {

using Json = nlohmann::json;

inline Json to_json_array(const Eigen::Ref<const Eigen::VectorXd>& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vector_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::invalid_argument, "expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), ErrorCode::invalid_argument, "expected a JSON array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline Json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json_array(m.row(r).transpose()));
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::invalid_argument, "expected a JSON array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, 0);
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    Eigen::VectorXd row = vector_from_json(j[r]);
    require(row.size() == cols, ErrorCode::shape_mismatch, "ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

/// Reads `key` from `j` into `out` when present; leaves `out` untouched otherwise.
template <typename T>
void read_optional(const Json& j, std::string_view key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

/// FNV-1a, used for state digests in replay checks.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mindpilot
