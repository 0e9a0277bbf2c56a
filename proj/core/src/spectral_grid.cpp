#include "chstep/spectral_grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "chstep/errors.hpp"

namespace chstep {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

void require_same_size(const Field& a, const Field& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("field size mismatch");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(double length, int points) : length_(length), points_(points) {
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("grid length must be positive and finite");
  }
  if (points < 4 || points % 2 != 0) {
    throw std::invalid_argument("grid points per direction must be even and >= 4");
  }
}

double Grid::nu() const noexcept { return 2.0 * std::numbers::pi / length_; }

// ---------------------------------------------------------------------------
// Field

Field::Field(int points, double value)
    : points_(points),
      data_(static_cast<std::size_t>(points) * static_cast<std::size_t>(points), value) {}

Field& Field::operator+=(const Field& other) {
  require_same_size(*this, other);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_size(*this, other);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Field& Field::operator*=(double s) {
  for (auto& x : data_) x *= s;
  return *this;
}

Field& Field::axpy(double s, const Field& other) {
  require_same_size(*this, other);
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * other.data_[k];
  return *this;
}

double Field::max_abs() const noexcept {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool Field::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> Field::row(int i) const {
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(index(i, 0));
  return {first, first + points_};
}

double max_abs_difference(const Field& a, const Field& b) {
  require_same_size(a, b);
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// ---------------------------------------------------------------------------
// SpectralField

std::complex<double> SpectralField::coefficient(int l, int m) const {
  const int n = points;
  if (l < -n / 2 || l >= n / 2 || m < -n / 2 || m >= n / 2) {
    throw std::out_of_range("mode number outside [-M/2, M/2-1]");
  }
  auto wrap = [n](int k) { return ((k % n) + n) % n; };
  if (m >= 0) {
    return half[static_cast<std::size_t>(wrap(l)) * half_width() + static_cast<std::size_t>(m)];
  }
  // c_{l,m} = conj(c_{-l,-m}); -m lies in [1, M/2] which is stored.
  return std::conj(
      half[static_cast<std::size_t>(wrap(-l)) * half_width() + static_cast<std::size_t>(-m)]);
}

// ---------------------------------------------------------------------------
// SpectralOps

struct SpectralOps::Impl {
  Grid grid;
  int n;
  int width;
  std::size_t real_size;
  std::size_t half_size;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::vector<double> minus_lap;  // nu^2 (l^2 + m^2)
  std::vector<double> kx;         // nu*l with the -M/2 mode zeroed, indexed by row
  std::vector<double> ky;         // nu*m with the -M/2 mode zeroed, indexed by column
  mutable std::vector<std::complex<double>> scratch;

  explicit Impl(Grid g)
      : grid(g),
        n(g.points()),
        width(g.points() / 2 + 1),
        real_size(g.size()),
        half_size(static_cast<std::size_t>(g.points()) * static_cast<std::size_t>(g.points() / 2 + 1)) {
    real_buf = static_cast<double*>(fftw_malloc(sizeof(double) * real_size));
    spec_buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half_size));
    if (real_buf == nullptr || spec_buf == nullptr) {
      release();
      throw std::bad_alloc();
    }
    {
      std::lock_guard lock(planner_mutex());
      fwd = fftw_plan_dft_r2c_2d(n, n, real_buf, spec_buf, FFTW_ESTIMATE);
      bwd = fftw_plan_dft_c2r_2d(n, n, spec_buf, real_buf, FFTW_ESTIMATE);
    }
    if (fwd == nullptr || bwd == nullptr) {
      release();
      throw std::runtime_error("FFTW plan creation failed");
    }

    const double nu = grid.nu();
    minus_lap.resize(half_size);
    kx.resize(static_cast<std::size_t>(n));
    ky.resize(static_cast<std::size_t>(width));
    for (int i = 0; i < n; ++i) {
      const int l = grid.mode(i);
      kx[static_cast<std::size_t>(i)] = (l == -n / 2) ? 0.0 : nu * l;
    }
    for (int j = 0; j < width; ++j) {
      // Column j = M/2 holds the unmatched -M/2 mode (stored as +M/2).
      ky[static_cast<std::size_t>(j)] = (j == n / 2) ? 0.0 : nu * j;
    }
    for (int i = 0; i < n; ++i) {
      const double l = grid.mode(i);
      for (int j = 0; j < width; ++j) {
        const double m = j;
        minus_lap[static_cast<std::size_t>(i) * width + j] = nu * nu * (l * l + m * m);
      }
    }
    scratch.resize(half_size);
  }

  ~Impl() { release(); }

  void release() {
    std::lock_guard lock(planner_mutex());
    if (fwd != nullptr) fftw_destroy_plan(fwd);
    if (bwd != nullptr) fftw_destroy_plan(bwd);
    if (real_buf != nullptr) fftw_free(real_buf);
    if (spec_buf != nullptr) fftw_free(spec_buf);
    fwd = bwd = nullptr;
    real_buf = nullptr;
    spec_buf = nullptr;
  }

  void forward(const Field& v, std::vector<std::complex<double>>& out) const {
    if (v.size() != real_size) throw std::invalid_argument("field does not match grid");
    std::copy(v.data(), v.data() + real_size, real_buf);
    fftw_execute(fwd);
    out.resize(half_size);
    for (std::size_t k = 0; k < half_size; ++k) {
      out[k] = {spec_buf[k][0], spec_buf[k][1]};
    }
  }

  void inverse(const std::vector<std::complex<double>>& in, Field& out) const {
    if (in.size() != half_size) throw std::invalid_argument("spectrum does not match grid");
    for (std::size_t k = 0; k < half_size; ++k) {
      spec_buf[k][0] = in[k].real();
      spec_buf[k][1] = in[k].imag();
    }
    fftw_execute(bwd);
    if (out.size() != real_size) out = Field(n);
    const double scale = 1.0 / static_cast<double>(real_size);
    for (std::size_t k = 0; k < real_size; ++k) out[k] = real_buf[k] * scale;
  }
};

SpectralOps::SpectralOps(Grid grid) : impl_(std::make_unique<Impl>(grid)) {}
SpectralOps::~SpectralOps() = default;
SpectralOps::SpectralOps(SpectralOps&&) noexcept = default;
SpectralOps& SpectralOps::operator=(SpectralOps&&) noexcept = default;

const Grid& SpectralOps::grid() const noexcept { return impl_->grid; }

std::span<const double> SpectralOps::minus_laplacian_symbol() const noexcept {
  return impl_->minus_lap;
}

void SpectralOps::forward_raw(const Field& v, std::vector<std::complex<double>>& out) const {
  impl_->forward(v, out);
}

void SpectralOps::inverse_raw(const std::vector<std::complex<double>>& in, Field& out) const {
  impl_->inverse(in, out);
}

SpectralField SpectralOps::forward(const Field& v) const {
  SpectralField s;
  s.points = impl_->n;
  impl_->forward(v, s.half);
  const double scale = 1.0 / static_cast<double>(impl_->real_size);
  for (auto& c : s.half) c *= scale;
  return s;
}

Field SpectralOps::inverse(const SpectralField& s) const {
  if (s.points != impl_->n) throw std::invalid_argument("spectrum does not match grid");
  auto& buf = impl_->scratch;
  const double scale = static_cast<double>(impl_->real_size);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = s.half[k] * scale;
  Field out(impl_->n);
  impl_->inverse(buf, out);
  return out;
}

Field SpectralOps::laplacian(const Field& v) const {
  auto& buf = impl_->scratch;
  impl_->forward(v, buf);
  for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= -impl_->minus_lap[k];
  Field out(impl_->n);
  impl_->inverse(buf, out);
  return out;
}

std::pair<Field, Field> SpectralOps::gradient(const Field& v) const {
  const int n = impl_->n;
  const int w = impl_->width;
  std::vector<std::complex<double>> hat;
  impl_->forward(v, hat);
  auto& buf = impl_->scratch;
  const std::complex<double> iu(0.0, 1.0);

  Field dx(n), dy(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * w + j;
      buf[k] = iu * impl_->kx[static_cast<std::size_t>(i)] * hat[k];
    }
  }
  impl_->inverse(buf, dx);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < w; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * w + j;
      buf[k] = iu * impl_->ky[static_cast<std::size_t>(j)] * hat[k];
    }
  }
  impl_->inverse(buf, dy);
  return {std::move(dx), std::move(dy)};
}

Field SpectralOps::inv_laplacian(const Field& v, double gamma) const {
  if (!(gamma > 0.0)) throw std::invalid_argument("inv_laplacian exponent must be positive");
  require_mean_zero(impl_->grid, v, norm_l2(impl_->grid, v));
  auto& buf = impl_->scratch;
  impl_->forward(v, buf);
  buf[0] = 0.0;
  for (std::size_t k = 1; k < buf.size(); ++k) {
    buf[k] *= std::pow(impl_->minus_lap[k], -gamma);
  }
  Field out(impl_->n);
  impl_->inverse(buf, out);
  return out;
}

double SpectralOps::inner_h1(const Field& u, const Field& v) const {
  Field lap = laplacian(u);
  return -inner(impl_->grid, lap, v);
}

double SpectralOps::seminorm_h1(const Field& v) const {
  return std::sqrt(std::max(0.0, inner_h1(v, v)));
}

double SpectralOps::norm_hm1(const Field& v) const {
  return norm_hm1(v, norm_l2(impl_->grid, v));
}

double SpectralOps::norm_hm1(const Field& v, double reference_norm) const {
  require_mean_zero(impl_->grid, v, reference_norm);
  auto& buf = impl_->scratch;
  impl_->forward(v, buf);
  buf[0] = 0.0;
  for (std::size_t k = 1; k < buf.size(); ++k) buf[k] /= impl_->minus_lap[k];
  Field w(impl_->n);
  impl_->inverse(buf, w);
  return std::sqrt(std::max(0.0, inner(impl_->grid, w, v)));
}

// ---------------------------------------------------------------------------
// Inner products and norms

double inner(const Grid& grid, const Field& u, const Field& v) {
  require_same_size(u, v);
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return grid.cell_area() * s;
}

double norm_l2(const Grid& grid, const Field& v) { return std::sqrt(inner(grid, v, v)); }

double norm_lq(const Grid& grid, const Field& v, double q) {
  if (std::isinf(q)) return v.max_abs();
  if (!(q >= 1.0)) throw std::invalid_argument("norm_lq requires q >= 1");
  double s = 0.0;
  for (double x : v.values()) s += std::pow(std::abs(x), q);
  return std::pow(grid.cell_area() * s, 1.0 / q);
}

double volume(const Grid& grid, const Field& v) {
  double s = 0.0;
  for (double x : v.values()) s += x;
  return grid.cell_area() * s;
}

void require_mean_zero(const Grid& grid, const Field& v, double reference_norm) {
  const double mass = volume(grid, v);
  const double limit = 1e-10 * reference_norm * grid.length();
  if (std::abs(mass) > limit) {
    std::ostringstream msg;
    msg << "grid function is not mean-zero: <v,1> = " << mass << " exceeds " << limit;
    throw NonZeroMean(msg.str());
  }
}

}  // namespace chstep
