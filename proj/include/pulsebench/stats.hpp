#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pulsebench/error.hpp"

namespace pb {

// Population statistics throughout: std divides by N, not N-1. This is the
// single convention used by the metrics, the normalizers, and SDNN.
template <class S>
S mean_of(std::span<const S> x) {
  require(!x.empty(), ErrorKind::kEmptyInput, "mean of empty sequence");
  double acc = 0.0;
  for (S v : x) acc += static_cast<double>(v);
  return static_cast<S>(acc / static_cast<double>(x.size()));
}

template <class S>
S pop_std(std::span<const S> x) {
  require(!x.empty(), ErrorKind::kEmptyInput, "std of empty sequence");
  const double m = static_cast<double>(mean_of(x));
  double acc = 0.0;
  for (S v : x) {
    const double d = static_cast<double>(v) - m;
    acc += d * d;
  }
  return static_cast<S>(std::sqrt(acc / static_cast<double>(x.size())));
}

template <class S>
S mean_of(const std::vector<S>& x) { return mean_of(std::span<const S>(x)); }
template <class S>
S pop_std(const std::vector<S>& x) { return pop_std(std::span<const S>(x)); }

template <class S>
double pearson(std::span<const S> a, std::span<const S> b) {
  require(a.size() == b.size(), ErrorKind::kInvalidLength,
          "pearson: length mismatch");
  require(a.size() >= 2, ErrorKind::kInvalidLength,
          "pearson needs at least 2 samples");
  const double ma = mean_of(a), mb = mean_of(b);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = static_cast<double>(a[i]) - ma;
    const double db = static_cast<double>(b[i]) - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  require(va > 0.0 && vb > 0.0, ErrorKind::kDegenerateVariance,
          "pearson: zero-variance input");
  const double rho = cov / std::sqrt(va * vb);
  return std::clamp(rho, -1.0, 1.0);
}

template <class S>
double pearson(const std::vector<S>& a, const std::vector<S>& b) {
  return pearson(std::span<const S>(a), std::span<const S>(b));
}

// Linear interpolation of (ts_src, vals) at the query times. Queries outside
// the source range clamp to the boundary value; sensors start and stop
// slightly offset from the video, so extrapolating would invent data.
template <class V>
std::vector<V> linear_interp(std::span<const double> ts_src, std::span<const V> vals,
                             std::span<const double> ts_query) {
  require(ts_src.size() == vals.size(), ErrorKind::kInvalidLength,
          "linear_interp: ts/vals length mismatch");
  require(!ts_src.empty(), ErrorKind::kEmptyInput, "linear_interp: empty source");
  for (std::size_t i = 1; i < ts_src.size(); ++i)
    require(ts_src[i] > ts_src[i - 1], ErrorKind::kOrdering,
            "linear_interp: source timestamps must be strictly increasing");

  std::vector<V> out(ts_query.size());
  for (std::size_t q = 0; q < ts_query.size(); ++q) {
    const double t = ts_query[q];
    if (t <= ts_src.front()) {
      out[q] = vals.front();
      continue;
    }
    if (t >= ts_src.back()) {
      out[q] = vals.back();
      continue;
    }
    const auto it = std::upper_bound(ts_src.begin(), ts_src.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - ts_src.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - ts_src[lo]) / (ts_src[hi] - ts_src[lo]);
    out[q] = static_cast<V>((1.0 - w) * static_cast<double>(vals[lo]) +
                            w * static_cast<double>(vals[hi]));
  }
  return out;
}

template <class V>
std::vector<V> linear_interp(const std::vector<double>& ts_src, const std::vector<V>& vals,
                             const std::vector<double>& ts_query) {
  return linear_interp(std::span<const double>(ts_src), std::span<const V>(vals),
                       std::span<const double>(ts_query));
}

}  // namespace pb
