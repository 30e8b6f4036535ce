#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "pulsebench/error.hpp"

namespace pb {

// Complex sequence holding the non-redundant half of a real spectrum.
template <class S>
struct ComplexSeqT {
  std::vector<S> re;
  std::vector<S> im;

  ComplexSeqT() = default;
  explicit ComplexSeqT(std::size_t n) : re(n, S(0)), im(n, S(0)) {}
  std::size_t size() const { return re.size(); }
};

using ComplexSeq = ComplexSeqT<float>;
using ComplexSeq64 = ComplexSeqT<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Unnormalized complex DFT of a fixed size. Power-of-two sizes run an
// iterative radix-2 Cooley-Tukey; all other sizes go through Bluestein's
// chirp-z reduction onto a power-of-two transform, which keeps arbitrary
// lengths (the model's native 450 included) O(n log n).
template <class S>
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    require(n >= 1, ErrorKind::kInvalidLength, "fft size must be >= 1");
    if (is_pow2(n_)) {
      init_pow2(n_, tw_, rev_);
    } else {
      m_ = next_pow2(2 * n_ - 1);
      init_pow2(m_, tw_, rev_);
      chirp_.resize(n_);
      for (std::size_t k = 0; k < n_; ++k) {
        // k^2 mod 2n keeps the angle argument small for large k.
        const std::uint64_t q = (static_cast<std::uint64_t>(k) * k) % (2 * n_);
        const double ang = -std::numbers::pi * static_cast<double>(q) / static_cast<double>(n_);
        chirp_[k] = {static_cast<S>(std::cos(ang)), static_cast<S>(std::sin(ang))};
      }
      std::vector<std::complex<S>> b(m_, std::complex<S>(0));
      b[0] = std::conj(chirp_[0]);
      for (std::size_t k = 1; k < n_; ++k) {
        b[k] = std::conj(chirp_[k]);
        b[m_ - k] = std::conj(chirp_[k]);
      }
      chirp_spec_ = b;
      pow2_inplace(chirp_spec_.data(), m_, tw_, rev_);
    }
  }

  std::size_t size() const { return n_; }

  // out[k] = sum_m in[m] * exp(-2*pi*i*k*m/n)
  void forward(const std::complex<S>* in, std::complex<S>* out) const {
    if (is_pow2(n_)) {
      std::copy(in, in + n_, out);
      pow2_inplace(out, n_, tw_, rev_);
      return;
    }
    std::vector<std::complex<S>> a(m_, std::complex<S>(0));
    for (std::size_t k = 0; k < n_; ++k) a[k] = in[k] * chirp_[k];
    pow2_inplace(a.data(), m_, tw_, rev_);
    for (std::size_t k = 0; k < m_; ++k) a[k] *= chirp_spec_[k];
    // inverse pow2 transform via conjugation
    for (auto& v : a) v = std::conj(v);
    pow2_inplace(a.data(), m_, tw_, rev_);
    const S inv_m = S(1) / static_cast<S>(m_);
    for (std::size_t k = 0; k < n_; ++k)
      out[k] = std::conj(a[k]) * inv_m * chirp_[k];
  }

  // out[k] = sum_m in[m] * exp(+2*pi*i*k*m/n)   (no 1/n scaling)
  void inverse_unscaled(const std::complex<S>* in, std::complex<S>* out) const {
    std::vector<std::complex<S>> tmp(n_);
    for (std::size_t k = 0; k < n_; ++k) tmp[k] = std::conj(in[k]);
    forward(tmp.data(), out);
    for (std::size_t k = 0; k < n_; ++k) out[k] = std::conj(out[k]);
  }

 private:
  static void init_pow2(std::size_t n, std::vector<std::complex<S>>& tw,
                        std::vector<std::uint32_t>& rev) {
    tw.resize(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
      tw[j] = {static_cast<S>(std::cos(ang)), static_cast<S>(std::sin(ang))};
    }
    rev.resize(n);
    rev[0] = 0;
    std::size_t bits = 0;
    while ((std::size_t(1) << bits) < n) ++bits;
    for (std::size_t i = 1; i < n; ++i)
      rev[i] = static_cast<std::uint32_t>((rev[i >> 1] >> 1) | ((i & 1) << (bits - 1)));
  }

  static void pow2_inplace(std::complex<S>* a, std::size_t n,
                           const std::vector<std::complex<S>>& tw,
                           const std::vector<std::uint32_t>& rev) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rev[i];
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
      const std::size_t half = len >> 1;
      const std::size_t step = n / len;
      for (std::size_t s = 0; s < n; s += len) {
        for (std::size_t j = 0; j < half; ++j) {
          const std::complex<S> u = a[s + j];
          const std::complex<S> v = a[s + j + half] * tw[j * step];
          a[s + j] = u + v;
          a[s + j + half] = u - v;
        }
      }
    }
  }

  std::size_t n_ = 0;
  std::size_t m_ = 0;  // bluestein inner size (0 means pow2 fast path)
  std::vector<std::complex<S>> tw_;
  std::vector<std::uint32_t> rev_;
  std::vector<std::complex<S>> chirp_;
  std::vector<std::complex<S>> chirp_spec_;
};

template <class S>
const FftPlan<S>& plan_for(std::size_t n) {
  static std::map<std::size_t, std::unique_ptr<FftPlan<S>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<FftPlan<S>>(n)).first;
  return *it->second;
}

}  // namespace detail

// Forward real FFT: X[k] = sum_n x[n] e^{-2 pi i k n / N}, k = 0..N/2.
template <class S>
ComplexSeqT<S> rfft(std::span<const S> x) {
  const std::size_t n = x.size();
  require(n >= 2, ErrorKind::kInvalidLength, "rfft needs at least 2 samples");
  const auto& plan = detail::plan_for<S>(n);
  std::vector<std::complex<S>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = std::complex<S>(x[i], S(0));
  plan.forward(in.data(), out.data());
  const std::size_t f = n / 2 + 1;
  ComplexSeqT<S> spec(f);
  for (std::size_t k = 0; k < f; ++k) {
    spec.re[k] = out[k].real();
    spec.im[k] = out[k].imag();
  }
  return spec;
}

template <class S>
ComplexSeqT<S> rfft(const std::vector<S>& x) {
  return rfft<S>(std::span<const S>(x.data(), x.size()));
}

// Inverse real FFT back to n samples. The spectrum is extended Hermitianly;
// imaginary parts of the DC bin (and the Nyquist bin for even n) do not reach
// the real output.
template <class S>
std::vector<S> irfft(const ComplexSeqT<S>& spec, std::size_t n) {
  require(n >= 2, ErrorKind::kInvalidLength, "irfft needs n >= 2");
  const std::size_t f = n / 2 + 1;
  require(spec.size() == f, ErrorKind::kInvalidLength,
          "irfft: spectrum length must be n/2+1");
  std::vector<std::complex<S>> full(n), out(n);
  for (std::size_t k = 0; k < f; ++k) full[k] = {spec.re[k], spec.im[k]};
  for (std::size_t k = 1; k < f; ++k) {
    const std::size_t m = n - k;
    if (m >= f) full[m] = std::conj(full[k]);
  }
  const auto& plan = detail::plan_for<S>(n);
  plan.inverse_unscaled(full.data(), out.data());
  std::vector<S> x(n);
  const S inv_n = S(1) / static_cast<S>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = out[i].real() * inv_n;
  return x;
}

// Adjoint of rfft as a linear map R^n -> R^{2F}, used by reverse-mode
// differentiation: given cotangents on (re, im) of the half spectrum,
// returns the cotangent on the input signal.
template <class S>
std::vector<S> rfft_adjoint(const ComplexSeqT<S>& grad_spec, std::size_t n) {
  const std::size_t f = n / 2 + 1;
  require(grad_spec.size() == f, ErrorKind::kInvalidLength,
          "rfft_adjoint: spectrum length must be n/2+1");
  std::vector<std::complex<S>> g(n, std::complex<S>(0)), out(n);
  for (std::size_t k = 0; k < f; ++k) g[k] = {grad_spec.re[k], grad_spec.im[k]};
  const auto& plan = detail::plan_for<S>(n);
  plan.inverse_unscaled(g.data(), out.data());
  std::vector<S> gx(n);
  for (std::size_t i = 0; i < n; ++i) gx[i] = out[i].real();
  return gx;
}

// Adjoint of irfft as a linear map R^{2F} -> R^n.
template <class S>
ComplexSeqT<S> irfft_adjoint(std::span<const S> grad_x) {
  const std::size_t n = grad_x.size();
  require(n >= 2, ErrorKind::kInvalidLength, "irfft_adjoint needs n >= 2");
  const std::size_t f = n / 2 + 1;
  const auto& plan = detail::plan_for<S>(n);
  std::vector<std::complex<S>> in(n), out(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = std::complex<S>(grad_x[i], S(0));
  plan.forward(in.data(), out.data());
  ComplexSeqT<S> g(f);
  const S inv_n = S(1) / static_cast<S>(n);
  const S two_inv_n = S(2) * inv_n;
  for (std::size_t k = 0; k < f; ++k) {
    const bool boundary = (k == 0) || (n % 2 == 0 && k == n / 2);
    const S scale = boundary ? inv_n : two_inv_n;
    g.re[k] = out[k].real() * scale;
    g.im[k] = boundary ? S(0) : out[k].imag() * scale;
  }
  return g;
}

template <class S>
ComplexSeqT<S> irfft_adjoint(const std::vector<S>& grad_x) {
  return irfft_adjoint<S>(std::span<const S>(grad_x.data(), grad_x.size()));
}

}  // namespace pb
