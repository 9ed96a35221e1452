#pragma once

#include <string>
#include <vector>

#include "dnarx/decoupler.hpp"

namespace dnarx::decouple::detail {

/// Model with coefficients re-solved for V; branches whose coefficient
/// vector underflows are removed (noted) and the rest re-solved.
DecoupledModel finish_model(Eigen::MatrixXd V, const narx::RegressorTable& tab,
                            const narx::NarxConfig& cfg, int M, std::uint64_t jitter_seed,
                            std::vector<std::string>& notes);

}  // namespace dnarx::decouple::detail
