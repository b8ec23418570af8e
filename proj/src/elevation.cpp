// SPDX-License-Identifier: Apache-2.0
#include "m2g2/elevation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "m2g2/errors.hpp"

namespace m2g2 {

RasterElevation::RasterElevation(std::size_t nrows, std::size_t ncols, double lat0, double lon0,
                                 double dlat, double dlon, std::vector<double> heights)
    : nrows_(nrows),
      ncols_(ncols),
      lat0_(lat0),
      lon0_(lon0),
      dlat_(dlat),
      dlon_(dlon),
      heights_(std::move(heights)) {
  if (nrows_ < 2 || ncols_ < 2) throw InvalidInput("elevation raster needs at least 2x2 cells");
  if (!(dlat_ > 0.0) || !(dlon_ > 0.0)) {
    throw InvalidInput("elevation raster spacing must be positive");
  }
  if (heights_.size() != nrows_ * ncols_) {
    throw InvalidInput("elevation raster: expected " + std::to_string(nrows_ * ncols_) +
                       " heights, got " + std::to_string(heights_.size()));
  }
}

RasterElevation RasterElevation::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open elevation raster " + path.string());
  std::size_t nrows = 0, ncols = 0;
  double lat0 = 0, lon0 = 0, dlat = 0, dlon = 0;
  if (!(in >> nrows >> ncols >> lat0 >> lon0 >> dlat >> dlon)) {
    throw DataError("elevation raster " + path.string() + ": malformed header");
  }
  std::vector<double> heights(nrows * ncols);
  for (auto& h : heights) {
    if (!(in >> h)) throw DataError("elevation raster " + path.string() + ": truncated grid");
  }
  return RasterElevation(nrows, ncols, lat0, lon0, dlat, dlon, std::move(heights));
}

void RasterElevation::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write elevation raster " + path.string());
  out << std::setprecision(17) << nrows_ << ' ' << ncols_ << ' ' << lat0_ << ' ' << lon0_ << ' '
      << dlat_ << ' ' << dlon_ << '\n';
  for (std::size_t r = 0; r < nrows_; ++r) {
    for (std::size_t c = 0; c < ncols_; ++c) out << at(r, c) << (c + 1 == ncols_ ? '\n' : ' ');
  }
}

double RasterElevation::elevation_at(GeoPoint p) const {
  const double fr = (p.latitude - lat0_) / dlat_;
  const double fc = (p.longitude - lon0_) / dlon_;
  constexpr double kSlack = 1e-9;
  const double max_r = static_cast<double>(nrows_ - 1);
  const double max_c = static_cast<double>(ncols_ - 1);
  if (!(fr >= -kSlack && fr <= max_r + kSlack && fc >= -kSlack && fc <= max_c + kSlack)) {
    throw DataError("elevation query (" + std::to_string(p.latitude) + ", " +
                    std::to_string(p.longitude) + ") outside raster bounds");
  }
  const double r = std::clamp(fr, 0.0, max_r);
  const double c = std::clamp(fc, 0.0, max_c);
  const std::size_t r0 = std::min(static_cast<std::size_t>(r), nrows_ - 2);
  const std::size_t c0 = std::min(static_cast<std::size_t>(c), ncols_ - 2);
  const double tr = r - static_cast<double>(r0);
  const double tc = c - static_cast<double>(c0);
  const double top = at(r0, c0) * (1.0 - tc) + at(r0, c0 + 1) * tc;
  const double bottom = at(r0 + 1, c0) * (1.0 - tc) + at(r0 + 1, c0 + 1) * tc;
  return top * (1.0 - tr) + bottom * tr;
}

}  // namespace m2g2
