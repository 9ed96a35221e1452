#include "dnarx/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dnarx/errors.hpp"

namespace dnarx::io {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ParseError("cannot write '" + path + "'");
  f << content;
  if (!f) throw ParseError("write failed for '" + path + "'");
}

std::string file_hash(const std::string& path) { return hex64(fnv1a64(read_text(path))); }

std::string config_hash(const nlohmann::json& run_config) {
  return hex64(fnv1a64(run_config.dump()));
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string hash_line(const std::string& run_hash) {
  return run_hash.empty() ? std::string() : "# run_config_hash=" + run_hash + "\n";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  const char* b = s.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  while (e && (*e == ' ' || *e == '\r' || *e == '\t')) ++e;
  if (e == b || (e && *e != '\0')) throw ParseError("not a number '" + s + "' in " + where);
  return v;
}

bool skip_line(const std::string& line) {
  return line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

void write_dataset_csv(const std::string& path, const narx::Dataset& d, const std::string& run_hash) {
  d.validate();
  std::string out = hash_line(run_hash) + "t,u,y\n";
  for (Eigen::Index k = 0; k < d.u.size(); ++k) {
    out += g17(static_cast<double>(k) / d.sample_rate_hz) + "," + g17(d.u[k]) + "," + g17(d.y[k]) + "\n";
  }
  write_text(path, out);
}

narx::Dataset read_dataset_csv(const std::string& path, const std::string& segments_json,
                               std::size_t min_zero_run) {
  std::istringstream in(read_text(path));
  std::string line;
  bool have_header = false;
  std::vector<double> t, u, y;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    if (!have_header) {
      std::string h = line;
      if (!h.empty() && h.back() == '\r') h.pop_back();
      if (h != "t,u,y") throw ParseError(path + ": expected header 't,u,y', got '" + h + "'");
      have_header = true;
      continue;
    }
    const auto cells = split(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 3) throw ParseError(where + ": expected 3 columns");
    t.push_back(to_double(cells[0], where));
    u.push_back(to_double(cells[1], where));
    y.push_back(to_double(cells[2], where));
  }
  if (!have_header) throw ParseError(path + ": empty dataset file");
  if (t.size() < 2) throw ParseError(path + ": need at least two samples");
  narx::Dataset d;
  d.u = Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
  d.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw ParseError(path + ": time column must increase");
  d.sample_rate_hz = 1.0 / dt;
  if (!segments_json.empty()) {
    d.segments = segments_from_json(json::parse(read_text(segments_json)));
  } else if (min_zero_run > 0) {
    auto segs = narx::segments_from_zero_runs(d.u, min_zero_run);
    if (!(segs.size() == 1 && segs[0].begin == 0 && segs[0].end == d.size())) d.segments = std::move(segs);
  }
  d.validate();
  return d;
}

json segments_to_json(const std::vector<narx::Segment>& segs) {
  json arr = json::array();
  for (const auto& s : segs) arr.push_back({s.begin, s.end});
  return json{{"segments", arr}};
}

std::vector<narx::Segment> segments_from_json(const json& j) {
  try {
    std::vector<narx::Segment> out;
    for (const auto& s : j.at("segments")) {
      out.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("segment JSON: ") + e.what());
  }
}

std::string poly_to_json(const poly::CoupledPolynomial& p, const std::string& run_hash) {
  std::string s = "{\n";
  if (!run_hash.empty()) s += "  \"run_config_hash\": \"" + run_hash + "\",\n";
  s += "  \"input_dim\": " + std::to_string(p.input_dim()) + ",\n";
  s += "  \"max_degree\": " + std::to_string(p.max_degree()) + ",\n";
  s += "  \"terms\": [";
  bool first = true;
  for (const auto& t : p.terms()) {
    s += first ? "\n" : ",\n";
    first = false;
    s += "    {\"exp\": [";
    for (std::size_t k = 0; k < t.exponents.size(); ++k) {
      if (k) s += ", ";
      s += std::to_string(t.exponents[k]);
    }
    s += "], \"coef\": " + g17(t.coefficient) + "}";
  }
  s += first ? "]\n}\n" : "\n  ]\n}\n";
  return s;
}

poly::CoupledPolynomial poly_from_json(const json& j) {
  try {
    std::vector<poly::MonomialTerm> terms;
    for (const auto& t : j.at("terms")) {
      terms.push_back({t.at("exp").get<std::vector<int>>(), t.at("coef").get<double>()});
    }
    return poly::CoupledPolynomial(j.at("input_dim").get<int>(), j.at("max_degree").get<int>(),
                                   std::move(terms));
  } catch (const json::exception& e) {
    throw ParseError(std::string("polynomial JSON: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("polynomial JSON: ") + e.what());
  }
}

void write_tensor(const std::string& base, const cpd::Tensor3& T, const std::string& run_hash) {
  static_assert(std::endian::native == std::endian::little, "tensor files are little-endian");
  const auto& data = T.data();
  write_text(base + ".bin", std::string(reinterpret_cast<const char*>(data.data()),
                                        data.size() * sizeof(double)));
  json h{{"dims", {T.dim(0), T.dim(1), T.dim(2)}},
         {"symmetric", T.symmetric()},
         {"layout", "k-slowest"},
         {"dtype", "float64-le"}};
  if (!run_hash.empty()) h["run_config_hash"] = run_hash;
  write_text(base + ".json", dump(h));
}

cpd::Tensor3 read_tensor(const std::string& base) {
  json h;
  try {
    h = json::parse(read_text(base + ".json"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("tensor header: ") + e.what());
  }
  if (h.value("layout", "") != "k-slowest") throw ParseError("tensor header: unsupported layout");
  const auto dims = h.at("dims").get<std::vector<Eigen::Index>>();
  if (dims.size() != 3) throw ParseError("tensor header: dims must have 3 entries");
  const std::string raw = read_text(base + ".bin");
  const auto n = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  if (raw.size() != n * sizeof(double)) throw ParseError("tensor data size does not match header");
  std::vector<double> data(n);
  std::memcpy(data.data(), raw.data(), raw.size());
  try {
    return cpd::Tensor3(dims[0], dims[1], dims[2], std::move(data), h.value("symmetric", false));
  } catch (const DimensionError& e) {
    throw ParseError(std::string("tensor file: ") + e.what());
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M, const std::string& run_hash) {
  std::string s = hash_line(run_hash);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) s += ",";
      s += g17(M(i, j));
    }
    s += "\n";
  }
  write_text(path, s);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    std::vector<double> r;
    for (const auto& c : split(line)) r.push_back(to_double(c, path + ":" + std::to_string(lineno)));
    if (!rows.empty() && r.size() != rows.front().size()) throw ParseError(path + ": ragged matrix");
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return M;
}

json config_to_json(const narx::NarxConfig& cfg) {
  return json{{"n_u", cfg.n_u}, {"n_y", cfg.n_y}, {"n_k", cfg.n_k}, {"degree", cfg.degree}};
}

narx::NarxConfig config_from_json(const json& j) {
  try {
    narx::NarxConfig c;
    c.n_u = j.at("n_u").get<int>();
    c.n_y = j.at("n_y").get<int>();
    c.n_k = j.at("n_k").get<int>();
    c.degree = j.value("degree", 3);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("NARX config JSON: ") + e.what());
  }
}

json model_to_json(const decouple::DecoupledModel& m, const json& provenance) {
  m.validate();
  json V = json::array();
  for (Eigen::Index i = 0; i < m.V.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.V.cols(); ++j) row.push_back(m.V(i, j));
    V.push_back(row);
  }
  json br = json::array();
  for (const auto& g : m.branches) {
    br.push_back({{"degree", g.degree()},
                  {"coeffs", std::vector<double>(g.coeffs().begin(), g.coeffs().end())}});
  }
  return json{{"config", config_to_json(m.cfg)},
              {"V", V},
              {"branches", br},
              {"c0", m.c0},
              {"provenance", provenance}};
}

decouple::DecoupledModel model_from_json(const json& j) {
  try {
    decouple::DecoupledModel m;
    m.cfg = config_from_json(j.at("config"));
    const auto& V = j.at("V");
    const auto rows = static_cast<Eigen::Index>(V.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(V.at(0).size()) : 0;
    m.V.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (static_cast<Eigen::Index>(V.at(i).size()) != cols) throw ParseError("model JSON: ragged V");
      for (Eigen::Index k = 0; k < cols; ++k) m.V(i, k) = V.at(i).at(k).get<double>();
    }
    for (const auto& b : j.at("branches")) m.branches.emplace_back(b.at("coeffs").get<std::vector<double>>());
    m.c0 = j.at("c0").get<double>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace dnarx::io
