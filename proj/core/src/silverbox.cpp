#include "dnarx/silverbox.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dnarx/errors.hpp"

namespace dnarx::bench {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

SilverBoxData parse_silverbox_text(const std::string& csv_text, const SilverBoxLayout& layout) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 2) throw ParseError("Silver-Box file: missing header with two or more columns");

  std::size_t iu = 0;
  std::size_t iy = 1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto h = lower(header[c]);
    if (h == "u" || h == "v1") iu = c;
    if (h == "y" || h == "v2") iy = c;
  }
  std::vector<double> u;
  std::vector<double> y;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() <= std::max(iu, iy)) {
      throw ParseError("Silver-Box file: line " + std::to_string(lineno) + " has too few columns");
    }
    char* end = nullptr;
    const double uv = std::strtod(cells[iu].c_str(), &end);
    if (end == cells[iu].c_str()) throw ParseError("Silver-Box file: bad number on line " + std::to_string(lineno));
    const double yv = std::strtod(cells[iy].c_str(), &end);
    if (end == cells[iy].c_str()) throw ParseError("Silver-Box file: bad number on line " + std::to_string(lineno));
    u.push_back(uv);
    y.push_back(yv);
  }
  if (u.size() <= layout.validation_samples) {
    throw ParseError("Silver-Box file: " + std::to_string(u.size()) + " samples, expected more than " +
                     std::to_string(layout.validation_samples));
  }

  SilverBoxData out;
  const auto nv = static_cast<Eigen::Index>(layout.validation_samples);
  const auto nt = static_cast<Eigen::Index>(u.size()) - nv;
  const Eigen::Map<const Eigen::VectorXd> U(u.data(), static_cast<Eigen::Index>(u.size()));
  const Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(y.size()));
  out.validation.u = U.head(nv);
  out.validation.y = Y.head(nv);
  out.validation.sample_rate_hz = kSilverBoxSampleRate;

  narx::Dataset tail;
  tail.u = U.tail(nt);
  tail.y = Y.tail(nt);
  tail.sample_rate_hz = kSilverBoxSampleRate;
  const double tol = layout.zero_tolerance * tail.u.cwiseAbs().maxCoeff();
  tail.segments = narx::segments_from_zero_runs(tail.u, layout.min_zero_run, tol);
  if (tail.segments.size() != layout.realizations) {
    throw ParseError("Silver-Box file: found " + std::to_string(tail.segments.size()) +
                     " multisine realizations separated by zero runs of >= " +
                     std::to_string(layout.min_zero_run) + " samples, expected " +
                     std::to_string(layout.realizations));
  }
  std::vector<std::size_t> all(layout.realizations);
  std::iota(all.begin(), all.end(), 0);
  out.realizations = tail.select_segments(all);
  all.pop_back();
  out.identification = tail.select_segments(all);
  out.test = tail.select_segments({layout.realizations - 1});
  return out;
}

SilverBoxData parse_silverbox(const std::string& path, const SilverBoxLayout& layout) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open Silver-Box file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_silverbox_text(ss.str(), layout);
}

}  // namespace dnarx::bench
