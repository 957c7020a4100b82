#pragma once

// Metric for the descent: the Hessian of the quadratic part of E_i (plus
// optional shifts), inverted mode by mode. The y-operators are circulant,
// so an FFT along y leaves one banded SPD system in x per Fourier mode.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "wellscape/energy.hpp"
#include "wellscape/field.hpp"

namespace wellscape {

/// Symmetric positive definite band matrix with Cholesky factorization in
/// place. Storage is lower band: a(i, i-k) for k = 0..bw.
class BandCholesky {
 public:
  BandCholesky(int n, int bw) : n_(n), bw_(bw), a_(static_cast<std::size_t>(n) * (bw + 1), 0.0) {}

  double& at(int i, int k) { return a_[static_cast<std::size_t>(i) * (bw_ + 1) + k]; }
  double at(int i, int k) const { return a_[static_cast<std::size_t>(i) * (bw_ + 1) + k]; }

  /// Adds v to entry (r, c) of the symmetric matrix; call once per unordered pair.
  void add(int r, int c, double v) {
    if (r < c) std::swap(r, c);
    if (r - c <= bw_) at(r, r - c) += v;
  }

  bool factor() {
    for (int i = 0; i < n_; ++i) {
      for (int k = std::min(bw_, i); k >= 1; --k) {
        const int j = i - k;
        double s = at(i, k);
        for (int m = 1; m <= bw_ - k && m <= j; ++m) s -= at(i, k + m) * at(j, m);
        at(i, k) = s / at(j, 0);
      }
      double d = at(i, 0);
      for (int k = 1; k <= std::min(bw_, i); ++k) d -= at(i, k) * at(i, k);
      if (!(d > 0.0)) return false;
      at(i, 0) = std::sqrt(d);
    }
    return true;
  }

  /// Solves in place for a strided right-hand side.
  template <typename T>
  void solve(T* x, std::size_t stride) const {
    for (int i = 0; i < n_; ++i) {
      T s = x[i * stride];
      for (int k = 1; k <= std::min(bw_, i); ++k) s -= at(i, k) * x[(i - k) * stride];
      x[i * stride] = s / at(i, 0);
    }
    for (int i = n_ - 1; i >= 0; --i) {
      T s = x[i * stride];
      for (int k = 1; k <= bw_ && i + k < n_; ++k) s -= at(i + k, k) * x[(i + k) * stride];
      x[i * stride] = s / at(i, 0);
    }
  }

 private:
  int n_, bw_;
  std::vector<double> a_;
};

/// Coefficients of the metric, each multiplying one quadratic form:
///   mass int u^2, dy int u_y^2, dyy int u_yy^2, dx int u_x^2,
///   dxy int u_xy^2, dxx int u_xx^2.
struct MetricWeights {
  double mass = 0.0;
  double dy = 0.0;
  double dyy = 0.0;
  double dx = 0.0;
  double dxy = 0.0;
  double dxx = 0.0;
};

/// Hessian of surface + elastic for the given parameters, with shifts added.
inline MetricWeights quadratic_metric(const EnergyParams& p, double mass_shift = 0.0, double dy_shift = 0.0) {
  const double e2 = p.epsilon * p.epsilon;
  MetricWeights m;
  m.mass = mass_shift;
  m.dy = dy_shift;
  m.dyy = e2;
  m.dx = 1.0;
  if (p.variant >= 2) m.dxy = (p.variant == 3 ? 2.0 : 1.0) * e2;
  if (p.variant == 3) m.dxx = e2;
  return m;
}

class FourierBandPreconditioner {
 public:
  FourierBandPreconditioner(const Grid& g, const MetricWeights& w) : g_(g), modes_(g.ny / 2 + 1) {
    const XStencil dx = make_dx_stencil(g);
    const XStencil dxx = make_dxx_stencil(g);
    const auto wx = column_weights(g);  // includes hy
    const int n = g.nx;                 // unknowns i = 1..nx
    for (int m = 0; m < modes_; ++m) {
      const double th = 2.0 * std::numbers::pi * m / g.ny;
      const double ly2 = std::pow(std::sin(th) / g.hy, 2);
      const double lyy2 = std::pow((2.0 - 2.0 * std::cos(th)) / (g.hy * g.hy), 2);
      BandCholesky b(n, 3);
      const double diag = w.mass + w.dy * ly2 + w.dyy * lyy2;
      for (int i = 1; i <= g.nx; ++i) b.add(i - 1, i - 1, 2.0 * diag * wx[i]);
      add_stencil(b, dx, wx, 2.0 * (w.dx + w.dxy * ly2));
      if (w.dxx != 0.0) add_stencil(b, dxx, wx, 2.0 * w.dxx);
      if (!b.factor()) throw Error(ErrorKind::Diverged, "metric is not positive definite");
      // interleave with the mode index innermost so that the solves in
      // apply() sweep contiguous memory; diagonals are stored inverted
      if (m == 0) coeff_.assign(static_cast<std::size_t>(n) * 4 * modes_, 0.0);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k <= std::min(3, i); ++k) {
          const double v = b.at(i, k);
          coeff_[(static_cast<std::size_t>(i) * 4 + k) * modes_ + m] = k == 0 ? 1.0 / v : v;
        }
      }
    }
    const int ny = g.ny;
    real_.reset(fftw_alloc_real(static_cast<std::size_t>(g.nx) * ny));
    spectrum_.reset(fftw_alloc_complex(static_cast<std::size_t>(g.nx) * modes_));
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_many_dft_r2c(1, &ny, g.nx, real_.get(), nullptr, 1, ny, spectrum_.get(), nullptr, 1, modes_,
                                  FFTW_ESTIMATE);
    inv_ = fftw_plan_many_dft_c2r(1, &ny, g.nx, spectrum_.get(), nullptr, 1, modes_, real_.get(), nullptr, 1, ny,
                                  FFTW_ESTIMATE);
  }

  ~FourierBandPreconditioner() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  FourierBandPreconditioner(const FourierBandPreconditioner&) = delete;
  FourierBandPreconditioner& operator=(const FourierBandPreconditioner&) = delete;

  /// out = P^-1 in on the free nodes; the pinned column i = 0 is set to 0.
  void apply(std::span<const double> in, std::span<double> out) {
    const std::size_t free = static_cast<std::size_t>(g_.nx) * g_.ny;
    std::copy_n(in.data() + g_.ny, free, real_.get());
    fftw_execute(fwd_);
    auto* spec = reinterpret_cast<std::complex<double>*>(spectrum_.get());
    solve_all(spec);
    fftw_execute(inv_);
    const double scale = 1.0 / g_.ny;
    for (std::size_t k = 0; k < free; ++k) out[g_.ny + k] = real_[k] * scale;
    std::fill_n(out.data(), g_.ny, 0.0);
  }

 private:
  struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
  };

  void solve_all(std::complex<double>* x) const {
    const int n = g_.nx, M = modes_;
    auto row = [&](int i) { return x + static_cast<std::size_t>(i) * M; };
    auto co = [&](int i, int k) { return coeff_.data() + (static_cast<std::size_t>(i) * 4 + k) * M; };
    for (int i = 0; i < n; ++i) {
      std::complex<double>* xi = row(i);
      for (int k = 1; k <= std::min(3, i); ++k) {
        const std::complex<double>* xk = row(i - k);
        const double* c = co(i, k);
        for (int m = 0; m < M; ++m) xi[m] -= c[m] * xk[m];
      }
      const double* d = co(i, 0);
      for (int m = 0; m < M; ++m) xi[m] *= d[m];
    }
    for (int i = n - 1; i >= 0; --i) {
      std::complex<double>* xi = row(i);
      for (int k = 1; k <= 3 && i + k < n; ++k) {
        const std::complex<double>* xk = row(i + k);
        const double* c = co(i + k, k);
        for (int m = 0; m < M; ++m) xi[m] -= c[m] * xk[m];
      }
      const double* d = co(i, 0);
      for (int m = 0; m < M; ++m) xi[m] *= d[m];
    }
  }

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  static void add_stencil(BandCholesky& b, const XStencil& s, const std::vector<double>& wx, double scale) {
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
      const auto& row = s.rows[r];
      const double f = scale * wx[r];
      for (int a = 0; a < row.count; ++a) {
        const int ca = row.first + a;
        if (ca == 0) continue;
        for (int c = 0; c <= a; ++c) {
          const int cc = row.first + c;
          if (cc == 0) continue;
          b.add(ca - 1, cc - 1, f * row.coeff[a] * row.coeff[c]);
        }
      }
    }
  }

  Grid g_;
  int modes_;
  std::vector<double> coeff_;  // [i][k][mode]
  std::unique_ptr<double[], FftwFree> real_;
  std::unique_ptr<fftw_complex[], FftwFree> spectrum_;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

}  // namespace wellscape
