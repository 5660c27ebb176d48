#pragma once

// File formats.
//
// Dataset: comma-separated text, header `x0,...,x{d-1},y0,...,y{c-1}`, one
// sample per line, numbers in shortest round-trip form.
//
// Model: JSON document with a format tag and version, layer dims, activation
// tags, row-major weight matrices, biases, the training config and the loss
// trace. save -> load -> save reproduces the file byte for byte.

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "jacest/errors.hpp"
#include "jacest/estimator.hpp"
#include "jacest/evaluation.hpp"

namespace jacest {

inline constexpr std::string_view kModelFormat = "jacest-model";
inline constexpr int kModelVersion = 1;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// ---- datasets -------------------------------------------------------------

inline void write_dataset(std::ostream& os, const SampleSet& s) {
  const auto d = s.inputs.rows(), c = s.outputs.rows();
  for (Eigen::Index k = 0; k < d; ++k) os << (k ? "," : "") << 'x' << k;
  for (Eigen::Index k = 0; k < c; ++k) os << ",y" << k;
  os << '\n';
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) os << (k ? "," : "") << format_double(s.inputs(k, i));
    for (Eigen::Index k = 0; k < c; ++k) os << ',' << format_double(s.outputs(k, i));
    os << '\n';
  }
}

inline SampleSet read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset: missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  int d = 0, c = 0;
  for (const auto& col : header) {
    std::string_view name = col;
    while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
    const bool is_x = !name.empty() && name.front() == 'x';
    const bool is_y = !name.empty() && name.front() == 'y';
    if (is_x && c == 0 && name == "x" + std::to_string(d)) {
      ++d;
    } else if (is_y && name == "y" + std::to_string(c)) {
      ++c;
    } else {
      throw FormatError("dataset: line 1: unexpected column '" + std::string(name) + "'; expected x0..x{d-1},y0..y{c-1}");
    }
  }
  if (d == 0 || c == 0) throw FormatError("dataset: line 1: need at least one x and one y column");

  std::vector<double> values;
  std::size_t lineno = 1, rows = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (int(fields.size()) != d + c) {
      throw FormatError("dataset: line " + std::to_string(lineno) + ": expected " + std::to_string(d + c) +
                        " fields, got " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      try {
        const double v = parse_double(f);
        if (!std::isfinite(v)) throw FormatError("non-finite value");
        values.push_back(v);
      } catch (const FormatError& e) {
        throw FormatError("dataset: line " + std::to_string(lineno) + ": " + e.what());
      }
    }
    ++rows;
  }
  SampleSet s;
  s.inputs.resize(d, Eigen::Index(rows));
  s.outputs.resize(c, Eigen::Index(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    for (int k = 0; k < d; ++k) s.inputs(k, Eigen::Index(i)) = values[i * std::size_t(d + c) + std::size_t(k)];
    for (int k = 0; k < c; ++k) s.outputs(k, Eigen::Index(i)) = values[i * std::size_t(d + c) + std::size_t(d + k)];
  }
  return s;
}

inline void save_dataset(const std::string& path, const SampleSet& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(os, s);
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline SampleSet load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_dataset(is);
}

// ---- config ---------------------------------------------------------------

inline nlohmann::ordered_json radius_to_json(double r) {
  if (std::isinf(r)) return "inf";
  return r;
}

inline double radius_from_json(const nlohmann::ordered_json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kInfinity;
    throw FormatError("r_max must be a number or \"inf\"");
  }
  return j.get<double>();
}

inline nlohmann::ordered_json config_to_json(const EstimatorConfig& c) {
  nlohmann::ordered_json j;
  j["d"] = c.d;
  j["c"] = c.c;
  j["layers"] = c.layers;
  j["k_max"] = c.k_max;
  j["r_max"] = radius_to_json(c.r_max);
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["max_w"] = c.max_w;
  j["seed"] = c.seed;
  return j;
}

inline EstimatorConfig config_from_json(const nlohmann::ordered_json& j) {
  EstimatorConfig c;
  c.d = j.at("d").get<int>();
  c.c = j.at("c").get<int>();
  c.layers = j.at("layers").get<std::vector<int>>();
  c.k_max = j.at("k_max").get<int>();
  c.r_max = radius_from_json(j.at("r_max"));
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.max_w = j.at("max_w").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// ---- models ---------------------------------------------------------------

inline std::string model_to_string(const TrainedEstimator& est) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["layer_dims"] = est.net.layer_dims;
  std::vector<std::string> acts;
  for (auto a : est.net.activations) acts.emplace_back(to_string(a));
  j["activations"] = acts;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (std::size_t l = 0; l < est.net.num_layers(); ++l) {
    const auto& w = est.net.params.weights[l];
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      std::vector<double> row(std::size_t(w.cols()));
      for (Eigen::Index k = 0; k < w.cols(); ++k) row[std::size_t(k)] = w(r, k);
      rows.push_back(row);
    }
    const auto& b = est.net.params.biases[l];
    nlohmann::ordered_json layer;
    layer["weights"] = std::move(rows);
    layer["biases"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["config"] = config_to_json(est.config);
  j["loss_trace"] = est.loss_trace;
  return j.dump(1) + "\n";
}

inline TrainedEstimator model_from_string(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw FormatError("model: wrong format tag");
    if (j.at("version").get<int>() != kModelVersion) throw FormatError("model: unsupported version");
    TrainedEstimator est;
    est.net.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    for (const auto& a : j.at("activations")) est.net.activations.push_back(activation_from_string(a.get<std::string>()));
    for (const auto& layer : j.at("layers")) {
      const auto& rows = layer.at("weights");
      const auto nrows = Eigen::Index(rows.size());
      const auto ncols = nrows ? Eigen::Index(rows.at(0).size()) : 0;
      Eigen::MatrixXd w(nrows, ncols);
      for (Eigen::Index r = 0; r < nrows; ++r) {
        const auto row = rows.at(std::size_t(r)).get<std::vector<double>>();
        if (Eigen::Index(row.size()) != ncols) throw FormatError("model: ragged weight matrix");
        for (Eigen::Index k = 0; k < ncols; ++k) w(r, k) = row[std::size_t(k)];
      }
      const auto b = layer.at("biases").get<std::vector<double>>();
      est.net.params.weights.push_back(std::move(w));
      est.net.params.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), Eigen::Index(b.size())));
    }
    est.config = config_from_json(j.at("config"));
    est.loss_trace = j.at("loss_trace").get<std::vector<double>>();
    est.net.validate();
    if (est.net.input_dim() != est.config.d || est.net.output_dim() != est.config.d * est.config.c) {
      throw FormatError("model: layer dims disagree with the config");
    }
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

inline void save_model(const std::string& path, const TrainedEstimator& est) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << model_to_string(est);
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline TrainedEstimator load_model(const std::string& path) { return model_from_string(read_file(path)); }

// ---- reports and fields ---------------------------------------------------

inline nlohmann::ordered_json report_to_json(const ErrorReport& r) {
  nlohmann::ordered_json j;
  j["metric"] = to_string(r.metric);
  j["delta"] = r.delta;
  j["value_percent"] = r.value_percent;
  j["retained"] = r.retained;
  j["total"] = r.total;
  return j;
}

inline void write_field(std::ostream& os, const FieldRows& field) {
  for (std::size_t k = 0; k < field.header.size(); ++k) os << (k ? "," : "") << field.header[k];
  os << '\n';
  for (Eigen::Index r = 0; r < field.rows.rows(); ++r) {
    for (Eigen::Index k = 0; k < field.rows.cols(); ++k) os << (k ? "," : "") << format_double(field.rows(r, k));
    os << '\n';
  }
}

}  // namespace jacest
