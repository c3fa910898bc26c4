#pragma once

#include <string>
#include <vector>

#include "mcd/ndarray.hpp"

namespace mcd {

enum class TailPolicy { drop, keep_partial };
TailPolicy parse_tail_policy(const std::string& name);

// Channel axis split into consecutive intervals; inside interval k every
// factors[k] consecutive channels are summed.
struct IntervalScheme {
  std::vector<std::size_t> interval_sizes;
  std::vector<std::size_t> factors;
  TailPolicy tail_policy = TailPolicy::drop;
};

struct RebinResult {
  Array data;
  // Source channel range [first, first + count) of every output channel.
  std::vector<std::size_t> group_first;
  std::vector<std::size_t> group_count;
  std::size_t dropped_channels = 0;
};

// Number of output channels the scheme produces.
std::size_t rebinned_channel_count(const IntervalScheme& scheme);

RebinResult rebin(const Array& stack, std::size_t channel_axis, const IntervalScheme& scheme);

// Per-output-channel mean of `values` over each group (e.g. channel energies
// or attenuation coefficients on the original grid).
std::vector<double> rebin_mean(const std::vector<double>& values, const RebinResult& groups);

}  // namespace mcd
