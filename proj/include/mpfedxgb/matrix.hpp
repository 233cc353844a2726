#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mpfedxgb/common.hpp"

namespace mpfedxgb {

// Column-major feature block held by one party.
struct LocalMatrix {
  std::size_t rows = 0;
  std::vector<std::vector<double>> cols;
  std::vector<std::string> names;

  std::size_t width() const { return cols.size(); }
  double at(std::size_t i, std::size_t j) const { return cols[j][i]; }

  void add_column(std::vector<double> c, std::string name = {}) {
    if (!cols.empty() && c.size() != rows) throw ShapeError("column length mismatch");
    rows = c.size();
    cols.push_back(std::move(c));
    names.push_back(std::move(name));
  }

  LocalMatrix select_rows(const std::vector<std::size_t>& idx) const {
    LocalMatrix out;
    out.rows = idx.size();
    out.names = names;
    for (const auto& c : cols) {
      std::vector<double> v(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) v[i] = c[idx[i]];
      out.cols.push_back(std::move(v));
    }
    return out;
  }
};

}  // namespace mpfedxgb
