#include "mcd/rebin.hpp"

#include <numeric>

namespace mcd {

TailPolicy parse_tail_policy(const std::string& name) {
  if (name == "drop") return TailPolicy::drop;
  if (name == "keep_partial") return TailPolicy::keep_partial;
  throw ConfigError("unknown tail policy '" + name + "' (expected drop | keep_partial)");
}

namespace {

void check(const IntervalScheme& s) {
  if (s.interval_sizes.empty()) throw ConfigError("rebin: scheme has no intervals");
  if (s.interval_sizes.size() != s.factors.size())
    throw ConfigError("rebin: " + std::to_string(s.interval_sizes.size()) + " intervals but " +
                      std::to_string(s.factors.size()) + " factors");
  for (auto f : s.factors)
    if (f < 1) throw ConfigError("rebin: factors must be >= 1");
}

}  // namespace

std::size_t rebinned_channel_count(const IntervalScheme& scheme) {
  check(scheme);
  std::size_t n = 0;
  for (std::size_t k = 0; k < scheme.interval_sizes.size(); ++k) {
    n += scheme.interval_sizes[k] / scheme.factors[k];
    if (scheme.tail_policy == TailPolicy::keep_partial && scheme.interval_sizes[k] % scheme.factors[k]) ++n;
  }
  return n;
}

RebinResult rebin(const Array& stack, std::size_t channel_axis, const IntervalScheme& scheme) {
  check(scheme);
  if (channel_axis >= stack.rank()) throw ConfigError("rebin: channel axis out of range");
  const std::size_t nc = stack.dim(channel_axis);
  const std::size_t total = std::accumulate(scheme.interval_sizes.begin(), scheme.interval_sizes.end(), std::size_t{0});
  if (total != nc)
    throw ConfigError("rebin: intervals cover " + std::to_string(total) + " channels, stack has " + std::to_string(nc));

  RebinResult r;
  std::size_t start = 0;
  for (std::size_t k = 0; k < scheme.interval_sizes.size(); ++k) {
    const std::size_t size = scheme.interval_sizes[k], f = scheme.factors[k];
    for (std::size_t g = 0; g + f <= size; g += f) {
      r.group_first.push_back(start + g);
      r.group_count.push_back(f);
    }
    const std::size_t rem = size % f;
    if (rem) {
      if (scheme.tail_policy == TailPolicy::keep_partial) {
        r.group_first.push_back(start + size - rem);
        r.group_count.push_back(rem);
      } else {
        r.dropped_channels += rem;
      }
    }
    start += size;
  }

  Shape out_shape = stack.shape();
  out_shape[channel_axis] = r.group_first.size();
  r.data = Array(out_shape, 0.0);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < channel_axis; ++i) outer *= stack.dim(i);
  for (std::size_t i = channel_axis + 1; i < stack.rank(); ++i) inner *= stack.dim(i);
  const std::size_t no = r.group_first.size();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t g = 0; g < no; ++g) {
      double* dst = r.data.data() + (o * no + g) * inner;
      for (std::size_t c = r.group_first[g]; c < r.group_first[g] + r.group_count[g]; ++c) {
        const double* src = stack.data() + (o * nc + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  return r;
}

std::vector<double> rebin_mean(const std::vector<double>& values, const RebinResult& groups) {
  std::vector<double> out(groups.group_first.size());
  for (std::size_t g = 0; g < out.size(); ++g) {
    double s = 0;
    for (std::size_t c = 0; c < groups.group_count[g]; ++c) s += values.at(groups.group_first[g] + c);
    out[g] = s / static_cast<double>(groups.group_count[g]);
  }
  return out;
}

}  // namespace mcd
