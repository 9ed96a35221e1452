#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "dnarx/decoupler.hpp"
#include "dnarx/narx.hpp"
#include "dnarx/poly.hpp"
#include "dnarx/tensor3.hpp"

namespace dnarx::io {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t h);
/// FNV-1a of a file's bytes; ParseError when unreadable.
std::string file_hash(const std::string& path);
/// Hash of the compact canonical dump (object keys sorted).
std::string config_hash(const nlohmann::json& run_config);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);

// time series

/// "t,u,y" CSV, preceded by a "# run_config_hash=..." line when a hash is given.
void write_dataset_csv(const std::string& path, const narx::Dataset& d,
                       const std::string& run_hash = {});
/// Lines starting with '#' are skipped. When `segments_json` is empty the
/// segments come from zero runs of u of length >= min_zero_run (0 disables).
narx::Dataset read_dataset_csv(const std::string& path, const std::string& segments_json = {},
                               std::size_t min_zero_run = 100);

nlohmann::json segments_to_json(const std::vector<narx::Segment>& segs);
std::vector<narx::Segment> segments_from_json(const nlohmann::json& j);

// polynomials

/// {input_dim, max_degree, terms:[{exp, coef}]}, coefficients with 17
/// significant digits, terms in canonical order.
std::string poly_to_json(const poly::CoupledPolynomial& p, const std::string& run_hash = {});
poly::CoupledPolynomial poly_from_json(const nlohmann::json& j);

// tensors and factors

/// `<base>.bin` holds little-endian doubles in k-slowest order, `<base>.json`
/// the header {dims, symmetric, layout}.
void write_tensor(const std::string& base, const cpd::Tensor3& T, const std::string& run_hash = {});
cpd::Tensor3 read_tensor(const std::string& base);

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M,
                      const std::string& run_hash = {});
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// models

nlohmann::json config_to_json(const narx::NarxConfig& cfg);
narx::NarxConfig config_from_json(const nlohmann::json& j);

/// {config, V (row-major), branches, c0, provenance}
nlohmann::json model_to_json(const decouple::DecoupledModel& m, const nlohmann::json& provenance);
decouple::DecoupledModel model_from_json(const nlohmann::json& j);

/// Stable text form: two-space indent, keys sorted, trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace dnarx::io
