#pragma once

#include <string>

#include "dnarx/narx.hpp"

namespace dnarx::bench {

inline constexpr double kSilverBoxSampleRate = 610.35;

struct SilverBoxData {
  narx::Dataset validation;      ///< leading filtered-noise block
  narx::Dataset identification;  ///< first nine multisine realizations, one segment each
  narx::Dataset test;            ///< tenth realization
  narx::Dataset realizations;    ///< all ten, segment per realization
};

struct SilverBoxLayout {
  std::size_t validation_samples = 40000;
  std::size_t realizations = 10;
  std::size_t min_zero_run = 100;
  /// |u| at or below this fraction of max |u| counts as a separator zero
  double zero_tolerance = 0.0;
};

/// CSV with a header row; input and output columns are taken from columns
/// named u/y (or V1/V2), otherwise the first two columns. Lines starting
/// with '#' are skipped. Throws ParseError on a layout mismatch.
SilverBoxData parse_silverbox(const std::string& path, const SilverBoxLayout& layout = {});
SilverBoxData parse_silverbox_text(const std::string& csv_text, const SilverBoxLayout& layout = {});

}  // namespace dnarx::bench
