#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"

namespace mindpilot {

/// A candidate stimulus: identifier + embedding, with an optional display
/// reference (file path or URI) used only by the rating UI.
struct Item {
  std::string id;
  Embedding embedding;
  std::optional<std::string> payload;
};

inline void to_json(Json& j, const Item& item) {
  j = Json{{"id", item.id}, {"embedding", to_json_array(item.embedding)}};
  if (item.payload) j["payload"] = *item.payload;
}

inline void from_json(const Json& j, Item& item) {
  item.id = j.at("id").get<std::string>();
  item.embedding = vector_from_json(j.at("embedding"));
  item.payload.reset();
  if (auto it = j.find("payload"); it != j.end() && it->is_string()) item.payload = it->get<std::string>();
}

/// Black-box reward: the only view any optimizer has of the objective.
using RewardFn = std::function<double(const Item&)>;

enum class SimilarityCache { none, rows };

/// Ordered stimulus database. Ids are unique and all embeddings share one length.
///
/// Rows of exp(cosine similarity) are memoized on demand under the `rows`
/// policy and extended lazily when the catalog grows. The cache is mutable
/// state, so a Catalog must not be shared between threads that query it.
class Catalog {
 public:
  Catalog() = default;

  explicit Catalog(std::vector<Item> items, SimilarityCache cache = SimilarityCache::rows) : cache_policy_(cache) {
    require(items.size() >= 2, ErrorCode::invalid_argument, "catalog needs at least 2 items");
    items_.reserve(items.size());
    for (auto& item : items) append(std::move(item));
  }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  Eigen::Index dim() const noexcept { return items_.empty() ? 0 : items_.front().embedding.size(); }

  const Item& operator[](std::size_t i) const { return items_[i]; }
  const Item& at(std::size_t i) const {
    require(i < items_.size(), ErrorCode::invalid_argument, "catalog index out of range: " + std::to_string(i));
    return items_[i];
  }
  const std::vector<Item>& items() const noexcept { return items_; }

  std::optional<std::size_t> index_of(const std::string& id) const {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    return std::nullopt;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  void append(Item item) {
    require(!index_.count(item.id), ErrorCode::invalid_argument, "duplicate item id '" + item.id + "'");
    require(items_.empty() || item.embedding.size() == dim(), ErrorCode::shape_mismatch,
            "item '" + item.id + "' has embedding length " + std::to_string(item.embedding.size()) +
                ", catalog uses " + std::to_string(dim()));
    require(item.embedding.size() > 0 && item.embedding.allFinite(), ErrorCode::non_finite,
            "item '" + item.id + "' has a non-finite or empty embedding");
    const double norm = item.embedding.norm();
    require(norm > 0.0, ErrorCode::degenerate_vector, "degenerate vector (item '" + item.id + "')");
    unit_.push_back(item.embedding / norm);
    index_.emplace(item.id, items_.size());
    items_.push_back(std::move(item));
  }

  double similarity(std::size_t i, std::size_t j) const { return std::clamp(unit_.at(i).dot(unit_.at(j)), -1.0, 1.0); }

  const Embedding& unit_embedding(std::size_t i) const { return unit_.at(i); }

  /// exp(s(u_i, u_l)) for every l in catalog order.
  const Eigen::VectorXd& exp_similarity_row(std::size_t i) const {
    if (cache_policy_ == SimilarityCache::none) {
      scratch_ = compute_row(i, 0, Eigen::VectorXd());
      return scratch_;
    }
    auto& row = rows_[i];
    if (static_cast<std::size_t>(row.size()) != items_.size()) row = compute_row(i, static_cast<std::size_t>(row.size()), row);
    return row;
  }

  SimilarityCache cache_policy() const noexcept { return cache_policy_; }

 private:
  Eigen::VectorXd compute_row(std::size_t i, std::size_t from, const Eigen::VectorXd& prefix) const {
    Eigen::VectorXd row(static_cast<Eigen::Index>(items_.size()));
    if (from > 0) row.head(static_cast<Eigen::Index>(from)) = prefix.head(static_cast<Eigen::Index>(from));
    for (std::size_t l = from; l < items_.size(); ++l) row[static_cast<Eigen::Index>(l)] = std::exp(similarity(i, l));
    return row;
  }

  std::vector<Item> items_;
  std::vector<Embedding> unit_;
  std::unordered_map<std::string, std::size_t> index_;
  SimilarityCache cache_policy_ = SimilarityCache::rows;
  mutable std::unordered_map<std::size_t, Eigen::VectorXd> rows_;
  mutable Eigen::VectorXd scratch_;
};

}  // namespace mindpilot
