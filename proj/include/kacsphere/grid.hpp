#ifndef KACSPHERE_GRID_HPP
#define KACSPHERE_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/fft.hpp"

namespace kacsphere {

/// Density sampled on a regular grid: node i along axis a sits at lower[a] + i * step[a].
/// Values are stored row-major with the last axis fastest.
template <std::size_t Dim>
struct Grid {
  std::array<double, Dim> lower{};
  std::array<double, Dim> step{};
  std::array<std::size_t, Dim> shape{};
  std::vector<double> values;

  Grid() = default;
  Grid(std::array<double, Dim> lo, std::array<double, Dim> h, std::array<std::size_t, Dim> n)
      : lower(lo), step(h), shape(n) {
    for (std::size_t a = 0; a < Dim; ++a)
      if (n[a] < 2 || !(h[a] > 0.0)) throw ParameterError("grid axes need >= 2 nodes and positive spacing");
    values.assign(size(), 0.0);
  }

  static constexpr std::size_t dimension() { return Dim; }

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t(1), std::multiplies<>());
  }
  double cell_volume() const {
    double v = 1.0;
    for (double h : step) v *= h;
    return v;
  }
  double upper(std::size_t a) const { return lower[a] + step[a] * double(shape[a] - 1); }
  double node(std::size_t a, std::size_t i) const { return lower[a] + step[a] * double(i); }

  std::size_t index(const std::array<std::size_t, Dim>& idx) const {
    std::size_t k = 0;
    for (std::size_t a = 0; a < Dim; ++a) k = k * shape[a] + idx[a];
    return k;
  }
  double& at(const std::array<std::size_t, Dim>& idx) { return values[index(idx)]; }
  double at(const std::array<std::size_t, Dim>& idx) const { return values[index(idx)]; }

  double mass() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s * cell_volume();
  }
  double peak() const { return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end()); }

  bool contains(const std::array<double, Dim>& x) const {
    for (std::size_t a = 0; a < Dim; ++a)
      if (!(x[a] >= lower[a] && x[a] <= upper(a))) return false;
    return true;
  }

  /// Multilinear interpolation; throws CoverageError outside the window.
  double interpolate(const std::array<double, Dim>& x) const {
    if (!contains(x)) throw CoverageError("query point lies outside the grid window");
    std::array<std::size_t, Dim> base{};
    std::array<double, Dim> frac{};
    for (std::size_t a = 0; a < Dim; ++a) {
      const double pos = (x[a] - lower[a]) / step[a];
      auto i = static_cast<std::size_t>(std::floor(pos));
      if (i >= shape[a] - 1) i = shape[a] - 2;
      base[a] = i;
      frac[a] = pos - double(i);
    }
    double acc = 0.0;
    for (std::size_t corner = 0; corner < (std::size_t(1) << Dim); ++corner) {
      double w = 1.0;
      std::array<std::size_t, Dim> idx{};
      for (std::size_t a = 0; a < Dim; ++a) {
        const bool up = (corner >> a) & 1u;
        idx[a] = base[a] + (up ? 1 : 0);
        w *= up ? frac[a] : 1.0 - frac[a];
      }
      if (w != 0.0) acc += w * at(idx);
    }
    return acc;
  }
};

using GridDensity = Grid<2>;

namespace detail {
inline std::size_t fft_friendly_size(std::size_t n) {
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}
}  // namespace detail

/// N-fold self convolution of a gridded density (node masses are convolved exactly).
/// The result has the same spacing, lower corner N * lower and N(n-1)+1 nodes per axis.
template <std::size_t Dim>
Grid<Dim> convolution_power(const Grid<Dim>& g, int N, std::size_t max_elements = std::size_t(1) << 27) {
  if (N < 1) throw ParameterError("convolution power needs N >= 1");
  if (N == 1) return g;
  std::array<double, Dim> lo{};
  std::array<std::size_t, Dim> shape{};
  std::vector<int> fft_dims(Dim);
  std::size_t total = 1;
  for (std::size_t a = 0; a < Dim; ++a) {
    lo[a] = N * g.lower[a];
    shape[a] = std::size_t(N) * (g.shape[a] - 1) + 1;
    fft_dims[a] = static_cast<int>(detail::fft_friendly_size(shape[a]));
    total *= std::size_t(fft_dims[a]);
  }
  if (total > max_elements) throw CapacityError("convolution power grid exceeds the element limit");
  Grid<Dim> out(lo, g.step, shape);
  std::vector<std::complex<double>> buf(total, 0.0);
  const double cv = g.cell_volume();
  auto padded_index = [&](const std::array<std::size_t, Dim>& idx) {
    std::size_t k = 0;
    for (std::size_t a = 0; a < Dim; ++a) k = k * std::size_t(fft_dims[a]) + idx[a];
    return k;
  };
  std::array<std::size_t, Dim> idx{};
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    std::size_t r = flat;
    for (std::size_t a = Dim; a-- > 0;) {
      idx[a] = r % g.shape[a];
      r /= g.shape[a];
    }
    buf[padded_index(idx)] = g.values[flat] * cv;
  }
  fft_inplace(fft_dims, buf, FFTW_FORWARD);
  for (auto& c : buf) {
    std::complex<double> base = c, acc = 1.0;
    for (int e = N; e > 0; e >>= 1) {
      if (e & 1) acc *= base;
      base *= base;
    }
    c = acc;
  }
  fft_inplace(fft_dims, buf, FFTW_BACKWARD);
  const double scale = 1.0 / (double(total) * cv);
  double peak = 0.0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t r = flat;
    for (std::size_t a = Dim; a-- > 0;) {
      idx[a] = r % out.shape[a];
      r /= out.shape[a];
    }
    out.values[flat] = buf[padded_index(idx)].real() * scale;
    peak = std::max(peak, out.values[flat]);
  }
  const double floor_tol = 1e-10 * std::max(peak, 1.0 / (double(out.size()) * cv));
  for (double& v : out.values) {
    if (v < -floor_tol) throw CoverageError("convolution power produced a significantly negative value");
    if (v < 0.0) v = 0.0;
  }
  return out;
}

inline constexpr char grid_magic[8] = {'K', 'S', 'G', 'R', 'I', 'D', '0', '1'};

/// Binary grid file: 8-byte magic, uint32 rank, per axis (uint64 nodes, double lower, double step),
/// double cell volume, uint64 value count, then the values as little-endian doubles (row-major).
template <std::size_t Dim>
void write_grid(std::ostream& os, const Grid<Dim>& g) {
  auto put = [&](const auto& x) { os.write(reinterpret_cast<const char*>(&x), sizeof(x)); };
  os.write(grid_magic, 8);
  put(std::uint32_t(Dim));
  for (std::size_t a = 0; a < Dim; ++a) {
    put(std::uint64_t(g.shape[a]));
    put(g.lower[a]);
    put(g.step[a]);
  }
  put(g.cell_volume());
  put(std::uint64_t(g.values.size()));
  os.write(reinterpret_cast<const char*>(g.values.data()), std::streamsize(g.values.size() * sizeof(double)));
  if (!os) throw Error("failed to write grid");
}

template <std::size_t Dim>
Grid<Dim> read_grid(std::istream& is) {
  auto get = [&](auto& x) { is.read(reinterpret_cast<char*>(&x), sizeof(x)); };
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, grid_magic, 8) != 0) throw ConfigError("not a grid file");
  std::uint32_t rank = 0;
  get(rank);
  if (rank != Dim) throw ShapeError("grid file rank mismatch");
  std::array<double, Dim> lo{}, h{};
  std::array<std::size_t, Dim> n{};
  for (std::size_t a = 0; a < Dim; ++a) {
    std::uint64_t s;
    get(s);
    n[a] = s;
    get(lo[a]);
    get(h[a]);
  }
  double cv;
  get(cv);
  std::uint64_t count;
  get(count);
  Grid<Dim> g(lo, h, n);
  if (count != g.size()) throw ShapeError("grid file value count mismatch");
  is.read(reinterpret_cast<char*>(g.values.data()), std::streamsize(count * sizeof(double)));
  if (!is) throw ConfigError("truncated grid file");
  return g;
}

template <std::size_t Dim>
void save_grid(const std::string& path, const Grid<Dim>& g) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path);
  write_grid(os, g);
}

template <std::size_t Dim>
Grid<Dim> load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_grid<Dim>(is);
}

}  // namespace kacsphere

#endif
