#pragma once

#include <vector>

#include "pnpcert/errors.hpp"

namespace pnpcert {

/// Strictly increasing positive angular frequencies (rad/s).
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> points);

  /// Logarithmic grid over [wmin, wmax].
  static FrequencyGrid logspace(double wmin, double wmax, int n);

  /// 2000 log points over [1e-2, 1e5] rad/s plus 200 linearly spaced points
  /// in [omega0/2, 2*omega0]; non-passivity of droop devices concentrates
  /// near and below the fundamental.
  static FrequencyGrid default_grid(double omega0 = 2.0 * 3.14159265358979323846 * 50.0);

  /// Same span with linearly interpolated extra points between neighbours.
  FrequencyGrid refined(int factor) const;

  /// Denser sub-grid covering [points[max(0,i-1)], points[min(n-1,i+1)]].
  FrequencyGrid window_around(std::size_t i, int n_points) const;

  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }

 private:
  std::vector<double> points_;
};

}  // namespace pnpcert
