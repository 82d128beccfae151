#pragma once

#include "lightcone/field.hpp"
#include "lightcone/random.hpp"

#include <filesystem>
#include <string>

namespace lightcone::testing {

inline Field random_field(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Field f(t, h, w);
  for (auto& v : f.values()) v = standard_normal(rng);
  return f;
}

inline Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = standard_normal(rng);
  return m;
}

inline Matrix rows(std::initializer_list<std::initializer_list<double>> data) {
  Matrix m(static_cast<Eigen::Index>(data.size()),
           static_cast<Eigen::Index>(data.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : data) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lightcone_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lightcone::testing
