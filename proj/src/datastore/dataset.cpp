#include "labloom/datastore.hpp"

#include "labloom/error.hpp"

#include <algorithm>
#include <cctype>
#include <fnmatch.h>
#include <fstream>
#include <set>
#include <sstream>

namespace labloom {

namespace fs = std::filesystem;

std::vector<FolderFile> read_folder(const fs::path& base_dir, const FolderSource& source) {
  const fs::path dir = fs::path(source.path).is_absolute() ? fs::path(source.path) : base_dir / source.path;
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::resolution, "folder '" + source.path + "' does not exist");
  }
  std::vector<fs::path> matches;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (::fnmatch(source.pattern.c_str(), name.c_str(), 0) == 0) matches.push_back(entry.path());
  }
  if (matches.empty()) {
    throw Error(ErrorCode::resolution, "no files in '" + source.path + "' match '" + source.pattern + "'");
  }
  std::sort(matches.begin(), matches.end());

  std::vector<FolderFile> out;
  for (const auto& path : matches) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    FolderFile f{path, path.stem().string(), ss.str()};
    try {
      if (source.format == Format::csv) {
        Table::from_csv(f.bytes);
      } else {
        f.bytes = json::parse(f.bytes).dump();
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::parse, "cannot parse '" + path.filename().string() + "' as " +
                                        std::string(to_string(source.format)) + ": " + e.what());
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::string folder_port(const FolderSource& source, const std::string& stem) {
  std::string raw = source.path + "/" + stem;
  std::string out;
  for (unsigned char c : raw) {
    out.push_back(std::isalnum(c) || c == '-' ? static_cast<char>(c) : '_');
  }
  return out;
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::target: return "target";
    case ColumnRole::id: return "id";
    case ColumnRole::meta: return "meta";
  }
  return "?";
}

std::string_view to_string(ColumnType type) {
  switch (type) {
    case ColumnType::number: return "number";
    case ColumnType::integer: return "integer";
    case ColumnType::boolean: return "boolean";
    case ColumnType::text: return "text";
  }
  return "?";
}

namespace {

ColumnRole parse_role(const std::string& s) {
  for (auto r : {ColumnRole::feature, ColumnRole::target, ColumnRole::id, ColumnRole::meta}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::schema, "unknown column role '" + s + "'");
}

ColumnType parse_type(const std::string& s) {
  for (auto t : {ColumnType::number, ColumnType::integer, ColumnType::boolean, ColumnType::text}) {
    if (to_string(t) == s) return t;
  }
  throw Error(ErrorCode::schema, "unknown column type '" + s + "'");
}

}  // namespace

void Dataset::check() const {
  if (columns.size() != rows.cols()) throw Error(ErrorCode::schema, "dataset declares a different column count");
  std::size_t ids = 0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].name != rows.columns()[c]) {
      throw Error(ErrorCode::schema, "dataset column '" + columns[c].name + "' is out of place");
    }
    if (columns[c].role == ColumnRole::id) ++ids;
    if (columns[c].type == ColumnType::number || columns[c].type == ColumnType::integer) {
      for (std::size_t r = 0; r < rows.rows(); ++r) {
        const double v = rows.number(r, c);
        if (columns[c].type == ColumnType::integer && v != static_cast<double>(static_cast<long long>(v))) {
          throw Error(ErrorCode::schema, "column '" + columns[c].name + "' row " + std::to_string(r) +
                                             " is not an integer");
        }
      }
    }
  }
  if (ids > 1) throw Error(ErrorCode::schema, "dataset has more than one id column");
  std::set<std::size_t> seen;
  for (const auto& [name, idx] : partitions) {
    for (auto i : idx) {
      if (i >= rows.rows()) throw Error(ErrorCode::schema, "partition '" + name + "' indexes past the last row");
      if (!seen.insert(i).second) throw Error(ErrorCode::schema, "partitions overlap at row " + std::to_string(i));
    }
  }
}

std::vector<std::string> Dataset::names_with(ColumnRole role) const {
  std::vector<std::string> out;
  for (const auto& c : columns) {
    if (c.role == role) out.push_back(c.name);
  }
  return out;
}

json Dataset::schema_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    cols.push_back({{"name", c.name}, {"role", std::string(to_string(c.role))}, {"type", std::string(to_string(c.type))}});
  }
  json j = {{"columns", cols}};
  if (!partitions.empty()) j["partitions"] = partitions;
  return j;
}

Dataset Dataset::from(Table table, const json& schema) {
  Dataset d;
  std::map<std::string, ColumnInfo> declared;
  try {
    for (const auto& cj : schema.value("columns", json::array())) {
      ColumnInfo info;
      info.name = cj.at("name").get<std::string>();
      info.role = parse_role(cj.value("role", std::string("feature")));
      info.type = parse_type(cj.value("type", std::string("number")));
      declared[info.name] = info;
    }
    if (schema.contains("partitions")) {
      d.partitions = schema.at("partitions").get<std::map<std::string, std::vector<std::size_t>>>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::schema, std::string("malformed dataset schema: ") + e.what());
  }
  for (const auto& [name, info] : declared) {
    if (!table.has_column(name)) throw Error(ErrorCode::schema, "schema names missing column '" + name + "'");
  }
  for (const auto& name : table.columns()) {
    auto it = declared.find(name);
    d.columns.push_back(it != declared.end() ? it->second : ColumnInfo{name, ColumnRole::meta, ColumnType::text});
  }
  d.rows = std::move(table);
  d.check();
  return d;
}

json ProblemContext::to_json() const {
  return {{"supervised", supervised}, {"target_columns", target_columns}, {"has_partitions", has_partitions}};
}

ProblemContext ProblemContext::from_json(const json& j) {
  ProblemContext c;
  c.supervised = j.at("supervised").get<bool>();
  c.target_columns = j.at("target_columns").get<std::vector<std::string>>();
  c.has_partitions = j.at("has_partitions").get<bool>();
  return c;
}

ProblemContext detect_problem_context(const Dataset& dataset) {
  ProblemContext c;
  c.target_columns = dataset.names_with(ColumnRole::target);
  c.supervised = !c.target_columns.empty();
  c.has_partitions = !dataset.partitions.empty();
  return c;
}

}  // namespace labloom
