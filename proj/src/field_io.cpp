#include "marglp/field_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "marglp/report_json.hpp"

namespace marglp {

namespace {

std::string payload_name(const std::string& header_path, PayloadEncoding enc) {
  std::string stem = header_path;
  const size_t dot = stem.rfind(".json");
  if (dot != std::string::npos && dot == stem.size() - 5) stem = stem.substr(0, dot);
  return stem + (enc == PayloadEncoding::Csv ? ".csv" : ".f64");
}

std::string dir_of(const std::string& path) {
  const size_t slash = path.rfind('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

std::string base_of(const std::string& path) {
  const size_t slash = path.rfind('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace

std::string write_field(const ScalarField& f, const std::string& path, PayloadEncoding enc) {
  const std::string payload = payload_name(path, enc);

  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-field");
  w.field("version", 1);
  w.field("order", "row-major-axis0-slowest");
  w.key("axes").begin_array();
  for (const Axis& ax : f.grid.axes) {
    w.begin_object();
    w.field("lower", ax.lower);
    w.field("upper", ax.upper);
    w.field("node_count", ax.count());
    w.field("scheme", to_string(ax.scheme));
    w.field("truncated", ax.truncated);
    w.end_object();
  }
  w.end_array();
  w.key("payload").begin_object();
  w.field("encoding", enc == PayloadEncoding::Csv ? "csv" : "f64le");
  w.field("file", base_of(payload));
  w.field("count", f.values.size());
  w.end_object();
  w.end_object();

  std::ofstream hout(path);
  if (!hout) throw InputError("cannot write file: " + path);
  hout << w.str() << "\n";

  if (enc == PayloadEncoding::Csv) {
    std::ofstream pout(payload);
    if (!pout) throw InputError("cannot write file: " + payload);
    char buf[40];
    for (Eigen::Index k = 0; k < f.values.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", f.values[k]);
      pout << buf << "\n";
    }
  } else {
    std::ofstream pout(payload, std::ios::binary);
    if (!pout) throw InputError("cannot write file: " + payload);
    static_assert(sizeof(double) == 8);
    pout.write(reinterpret_cast<const char*>(f.values.data()),
               static_cast<std::streamsize>(f.values.size()) * 8);
  }
  return payload;
}

ScalarField read_field(const std::string& path) {
  const nlohmann::json j = load_json(path);
  if (j.value("format", "") != "marglp-field")
    throw InputError(path + ": not a marglp-field header (key 'format')");

  GridSpec grid;
  if (!j.contains("axes") || !j["axes"].is_array())
    throw InputError(path + ": missing 'axes' array");
  for (const auto& ja : j["axes"]) {
    grid.axes.push_back(build_axis(ja.at("lower").get<double>(), ja.at("upper").get<double>(),
                                   ja.at("node_count").get<Eigen::Index>(),
                                   quad_scheme_from_string(ja.at("scheme").get<std::string>()),
                                   ja.value("truncated", false)));
  }

  const auto& jp = j.at("payload");
  const std::string enc = jp.at("encoding").get<std::string>();
  const std::string file = dir_of(path) + jp.at("file").get<std::string>();
  const Eigen::Index count = jp.at("count").get<Eigen::Index>();
  if (count != grid.total_nodes())
    throw InputError(path + ": payload count does not match the grid");

  Eigen::ArrayXd vals(count);
  if (enc == "csv") {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open payload: " + file);
    std::string line;
    Eigen::Index k = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (k >= count) throw InputError(file + ": more values than header count");
      vals[k++] = std::stod(line);
    }
    if (k != count) throw InputError(file + ": fewer values than header count");
  } else if (enc == "f64le") {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open payload: " + file);
    in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(count) * 8);
    if (in.gcount() != static_cast<std::streamsize>(count) * 8)
      throw InputError(file + ": truncated binary payload");
  } else {
    throw InputError(path + ": unknown payload encoding '" + enc + "'");
  }
  return ScalarField(std::move(grid), std::move(vals));
}

void write_marginals(const MarginalSet& m, const GridSpec& grid, const std::string& path) {
  if (m.axis_count() != grid.dim()) throw ShapeError("write_marginals: axis count mismatch");
  JsonWriter w;
  w.begin_object();
  w.field("format", "marglp-marginals");
  w.field("version", 1);
  w.key("arrays").begin_array();
  for (const auto& a : m.arrays) w.value(a);
  w.end_array();
  w.end_object();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path);
  out << w.str() << "\n";
}

MarginalSet read_marginals(const std::string& path, const GridSpec& grid) {
  const nlohmann::json j = load_json(path);
  if (j.value("format", "") != "marglp-marginals")
    throw InputError(path + ": not a marglp-marginals file (key 'format')");
  MarginalSet m;
  for (const auto& ja : j.at("arrays")) {
    Eigen::ArrayXd a(ja.size());
    Eigen::Index k = 0;
    for (const auto& v : ja) a[k++] = v.get<double>();
    m.arrays.push_back(std::move(a));
  }
  if (m.axis_count() != grid.dim())
    throw InputError(path + ": marginal axis count does not match the grid");
  for (Eigen::Index i = 0; i < grid.dim(); ++i) {
    if (m.arrays[static_cast<size_t>(i)].size() != grid.node_count(i))
      throw InputError(path + ": array length mismatch on axis " + std::to_string(i));
    if (!m.arrays[static_cast<size_t>(i)].allFinite())
      throw InputError(path + ": non-finite marginal value on axis " + std::to_string(i));
  }
  return m;
}

}  // namespace marglp
