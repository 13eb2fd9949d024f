#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"

namespace mindpilot::io {

namespace fs = std::filesystem;

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::invalid_argument, "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out << text;
  require(out.good(), ErrorCode::io, "write to '" + path.string() + "' failed");
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// Append-only JSON-lines file; each record is flushed as one line.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const fs::path& path, bool truncate = false) : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
    require(out_.good(), ErrorCode::io, "cannot open '" + path.string() + "' for appending");
  }

  void write(const Json& record) {
    std::lock_guard lock(mu_);
    out_ << record.dump() << '\n';
    out_.flush();
    require(out_.good(), ErrorCode::io, "write to '" + path_.string() + "' failed");
  }

  bool is_open() const { return out_.is_open(); }
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

inline std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  std::vector<Json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<std::string> row) {
    require(row.size() == header_.size(), ErrorCode::shape_mismatch, "csv row has the wrong number of fields");
    rows_.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + csv_escape(r[i]);
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

  void save(const fs::path& path) const { write_text(path, str()); }

  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows(1);
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') field += '"', ++i;
      else if (c == '"') quoted = false;
      else field += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rows.back().push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      rows.back().push_back(std::move(field));
      field.clear();
      rows.emplace_back();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !rows.back().empty()) rows.back().push_back(std::move(field));
  if (rows.back().empty()) rows.pop_back();
  return rows;
}

// ---------------------------------------------------------------------------
// Corpus manifests
//
// manifest.json:
//   {"items": [{"id": "...", "embedding": [..]} |
//              {"id": "...", "embedding_file": "emb/a.json", "image": "img/a.png"}, ...]}
// A bare top-level array is accepted too. Relative paths resolve against the
// manifest directory; `image` becomes the item payload, as given.

inline Embedding read_embedding_file(const fs::path& path) {
  const std::string text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      fail(ErrorCode::invalid_argument, "malformed embedding file '" + path.string() + "': " + e.what());
    }
    return vector_from_json(j.is_object() ? j.at("embedding") : j);
  }
  std::vector<double> v;
  std::string token;
  std::istringstream ss(text);
  while (ss >> token) {
    for (char& c : token)
      if (c == ',') c = ' ';
    std::istringstream ts(token);
    double x;
    while (ts >> x) v.push_back(x);
  }
  require(!v.empty(), ErrorCode::invalid_argument, "embedding file '" + path.string() + "' is empty");
  return Eigen::Map<Embedding>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Catalog load_manifest(const fs::path& manifest) {
  require(fs::exists(manifest), ErrorCode::not_found, "corpus manifest '" + manifest.string() + "' not found");
  const Json j = read_json(manifest);
  const Json& list = j.is_array() ? j : j.at("items");
  require(list.is_array(), ErrorCode::invalid_argument, "manifest 'items' must be an array");
  const fs::path base = manifest.parent_path();
  std::vector<Item> items;
  for (const auto& entry : list) {
    Item item;
    item.id = entry.at("id").get<std::string>();
    if (auto it = entry.find("embedding"); it != entry.end()) {
      item.embedding = vector_from_json(*it);
    } else {
      const fs::path p = entry.at("embedding_file").get<std::string>();
      item.embedding = read_embedding_file(p.is_absolute() ? p : base / p);
    }
    if (auto it = entry.find("image"); it != entry.end() && it->is_string()) item.payload = it->get<std::string>();
    else if (auto pt = entry.find("payload"); pt != entry.end() && pt->is_string()) item.payload = pt->get<std::string>();
    items.push_back(std::move(item));
  }
  try {
    return Catalog(std::move(items));
  } catch (const Error& e) {
    fail(e.code(), "manifest '" + manifest.string() + "': " + e.what());
  }
}

inline void save_manifest(const fs::path& manifest, const Catalog& catalog) {
  Json items = Json::array();
  for (const auto& item : catalog.items()) {
    Json e{{"id", item.id}, {"embedding", to_json_array(item.embedding)}};
    if (item.payload) e["image"] = *item.payload;
    items.push_back(std::move(e));
  }
  write_json(manifest, Json{{"items", std::move(items)}});
}

}  // namespace mindpilot::io
