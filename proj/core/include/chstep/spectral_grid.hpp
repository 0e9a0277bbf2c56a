#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace chstep {

/// Uniform periodic M x M grid on the square (0, L)^2.
///
/// Grid points are x_i = i h, y_j = j h for 0 <= i, j < M with h = L / M.
/// Fourier mode indices run over -M/2 .. M/2-1 in each direction with base
/// wavenumber nu = 2 pi / L.
class Grid {
 public:
  /// Throws std::invalid_argument unless `points` is even and >= 4 and
  /// `length` is positive and finite.
  Grid(double length, int points);

  double length() const noexcept { return length_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept { return length_ / points_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(points_) * static_cast<std::size_t>(points_);
  }
  double nu() const noexcept;

  /// Signed mode number for storage index `i` in [0, M): i for i < M/2, i - M otherwise.
  int mode(int i) const noexcept { return i < points_ / 2 ? i : i - points_; }
  double wavenumber(int i) const noexcept { return nu() * mode(i); }
  double coordinate(int i) const noexcept { return i * spacing(); }

  /// Area weight h^2 of a grid cell.
  double cell_area() const noexcept { return spacing() * spacing(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double length_;
  int points_;
};

/// Real grid function, stored row-major with the x index outermost:
/// value(i, j) lives at i * M + j.
class Field {
 public:
  Field() = default;
  explicit Field(int points, double value = 0.0);

  template <class Fn>
  static Field from_function(const Grid& grid, Fn&& fn) {
    Field f(grid.points());
    for (int i = 0; i < grid.points(); ++i) {
      for (int j = 0; j < grid.points(); ++j) {
        f(i, j) = fn(grid.coordinate(i), grid.coordinate(j));
      }
    }
    return f;
  }

  int points() const noexcept { return points_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int i, int j) noexcept { return data_[index(i, j)]; }
  double operator()(int i, int j) const noexcept { return data_[index(i, j)]; }
  double& operator[](std::size_t k) noexcept { return data_[k]; }
  double operator[](std::size_t k) const noexcept { return data_[k]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);
  /// this += s * other
  Field& axpy(double s, const Field& other);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

  double max_abs() const noexcept;
  bool all_finite() const noexcept;

  /// Row i (fixed x index) as a slice over y.
  std::vector<double> row(int i) const;

 private:
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(points_) +
           static_cast<std::size_t>(j);
  }

  int points_ = 0;
  std::vector<double> data_;
};

/// Max-norm distance between two fields of the same size.
double max_abs_difference(const Field& a, const Field& b);

/// Pseudo-spectral coefficients of a real field.
///
/// Only the half spectrum m in [0, M/2] is stored (the y direction is the
/// halved one); the remaining coefficients follow from conjugate symmetry.
/// Coefficients are normalized so that the field equals
/// sum_{l,m} c_{l,m} exp(i nu (l x + m y)) at the grid points.
struct SpectralField {
  int points = 0;
  std::vector<std::complex<double>> half;

  /// Storage width of the halved dimension, M/2 + 1.
  int half_width() const noexcept { return points / 2 + 1; }

  /// Coefficient for signed mode numbers l, m in [-M/2, M/2 - 1].
  std::complex<double> coefficient(int l, int m) const;
};

/// Discrete Fourier transforms and pseudo-spectral operators on a Grid.
///
/// Owns FFTW plans and scratch buffers. Operations are logically const but
/// reuse the scratch buffers, so one instance must not be used from two
/// threads at once; construct one per thread instead.
class SpectralOps {
 public:
  explicit SpectralOps(Grid grid);
  ~SpectralOps();
  SpectralOps(SpectralOps&&) noexcept;
  SpectralOps& operator=(SpectralOps&&) noexcept;
  SpectralOps(const SpectralOps&) = delete;
  SpectralOps& operator=(const SpectralOps&) = delete;

  const Grid& grid() const noexcept;

  SpectralField forward(const Field& v) const;
  Field inverse(const SpectralField& s) const;

  /// Delta_h v. Keeps the unmatched -M/2 mode.
  Field laplacian(const Field& v) const;

  /// (D_x v, D_y v). The unmatched -M/2 mode is dropped in each direction so
  /// that both components stay real.
  std::pair<Field, Field> gradient(const Field& v) const;

  /// (-Delta_h)^{-gamma} v with the zero mode removed.
  /// Throws NonZeroMean unless |<v,1>| <= 1e-10 * ||v|| * L.
  Field inv_laplacian(const Field& v, double gamma = 1.0) const;

  /// ||grad_h v||, computed as sqrt(<-Delta_h v, v>) so that the discrete
  /// Green formula holds for every grid function.
  double seminorm_h1(const Field& v) const;
  /// <grad_h u, grad_h v> = <-Delta_h u, v>.
  double inner_h1(const Field& u, const Field& v) const;

  /// ||v||_{-1} = sqrt(<(-Delta_h)^{-1} v, v>). Throws NonZeroMean.
  double norm_hm1(const Field& v) const;
  /// Same, but the mean-zero check is made against `reference_norm`
  /// instead of ||v||. Used for differences of nearby fields whose mean
  /// carries the roundoff of the (much larger) fields themselves.
  double norm_hm1(const Field& v, double reference_norm) const;

  /// Eigenvalues nu^2 (l^2 + m^2) of -Delta_h in half-spectrum layout.
  std::span<const double> minus_laplacian_symbol() const noexcept;

  /// Raw transforms into and out of half-spectrum storage, unnormalized on
  /// the way back in: inverse_raw divides by M^2.
  void forward_raw(const Field& v, std::vector<std::complex<double>>& out) const;
  void inverse_raw(const std::vector<std::complex<double>>& in, Field& out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// <u, v> = h^2 sum u v.
double inner(const Grid& grid, const Field& u, const Field& v);
double norm_l2(const Grid& grid, const Field& v);
/// (h^2 sum |v|^q)^{1/q}; q = infinity gives the max norm.
double norm_lq(const Grid& grid, const Field& v, double q);
/// <v, 1>.
double volume(const Grid& grid, const Field& v);

/// Throws NonZeroMean unless |<v,1>| <= 1e-10 * reference_norm * L.
void require_mean_zero(const Grid& grid, const Field& v, double reference_norm);

}  // namespace chstep
