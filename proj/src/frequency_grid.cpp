#include "pnpcert/frequency_grid.hpp"

#include <algorithm>
#include <cmath>

namespace pnpcert {

FrequencyGrid::FrequencyGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ValidationError("frequency grid needs at least 2 points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i] > 0.0)) throw ValidationError("frequency grid points must be > 0");
    if (i > 0 && !(points_[i] > points_[i - 1]))
      throw ValidationError("frequency grid must be strictly increasing");
  }
}

FrequencyGrid FrequencyGrid::logspace(double wmin, double wmax, int n) {
  std::vector<double> pts(static_cast<std::size_t>(n));
  const double l0 = std::log10(wmin), l1 = std::log10(wmax);
  for (int i = 0; i < n; ++i)
    pts[static_cast<std::size_t>(i)] = std::pow(10.0, l0 + (l1 - l0) * i / (n - 1));
  return FrequencyGrid(std::move(pts));
}

FrequencyGrid FrequencyGrid::default_grid(double omega0) {
  FrequencyGrid base = logspace(1e-2, 1e5, 2000);
  std::vector<double> pts = base.points_;
  const double lo = 0.5 * omega0, hi = 2.0 * omega0;
  for (int i = 0; i < 200; ++i) pts.push_back(lo + (hi - lo) * i / 199.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return FrequencyGrid(std::move(pts));
}

FrequencyGrid FrequencyGrid::refined(int factor) const {
  std::vector<double> pts;
  pts.reserve(points_.size() * static_cast<std::size_t>(factor));
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    for (int k = 0; k < factor; ++k)
      pts.push_back(points_[i] + (points_[i + 1] - points_[i]) * k / factor);
  }
  pts.push_back(points_.back());
  return FrequencyGrid(std::move(pts));
}

FrequencyGrid FrequencyGrid::window_around(std::size_t i, int n_points) const {
  const std::size_t lo = (i == 0) ? 0 : i - 1;
  const std::size_t hi = std::min(points_.size() - 1, i + 1);
  const double a = points_[lo], b = points_[hi];
  std::vector<double> pts(static_cast<std::size_t>(n_points));
  for (int k = 0; k < n_points; ++k)
    pts[static_cast<std::size_t>(k)] = a + (b - a) * k / (n_points - 1);
  return FrequencyGrid(std::move(pts));
}

}  // namespace pnpcert
