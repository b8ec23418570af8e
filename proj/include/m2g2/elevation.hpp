// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <vector>

namespace m2g2 {

struct GeoPoint {
  double latitude = 0.0;   ///< degrees
  double longitude = 0.0;  ///< degrees
};

/// Terrain height lookup, meters above sea level.
class ElevationProfile {
 public:
  virtual ~ElevationProfile() = default;
  /// Throws DataError for coordinates the source cannot answer.
  virtual double elevation_at(GeoPoint p) const = 0;
};

class FlatElevation final : public ElevationProfile {
 public:
  explicit FlatElevation(double height = 0.0) : height_(height) {}
  double elevation_at(GeoPoint) const override { return height_; }

 private:
  double height_;
};

/// Adapts an arbitrary callable; mainly for synthetic terrain in tests.
class FunctionElevation final : public ElevationProfile {
 public:
  explicit FunctionElevation(std::function<double(GeoPoint)> fn) : fn_(std::move(fn)) {}
  double elevation_at(GeoPoint p) const override { return fn_(p); }

 private:
  std::function<double(GeoPoint)> fn_;
};

/// Regular lat/lon grid with bilinear interpolation between cell corners.
///
/// File format (plain text): first line `nrows ncols lat0 lon0 dlat dlon`,
/// then nrows*ncols elevations in row-major order. Row r lies at latitude
/// lat0 + r*dlat, column c at longitude lon0 + c*dlon.
class RasterElevation final : public ElevationProfile {
 public:
  RasterElevation(std::size_t nrows, std::size_t ncols, double lat0, double lon0, double dlat,
                  double dlon, std::vector<double> heights);

  static RasterElevation load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  double elevation_at(GeoPoint p) const override;

  std::size_t rows() const noexcept { return nrows_; }
  std::size_t cols() const noexcept { return ncols_; }

 private:
  double at(std::size_t r, std::size_t c) const { return heights_[r * ncols_ + c]; }

  std::size_t nrows_, ncols_;
  double lat0_, lon0_, dlat_, dlon_;
  std::vector<double> heights_;
};

}  // namespace m2g2
