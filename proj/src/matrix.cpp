#include "baryvae/matrix.hpp"

#include <algorithm>
#include <string>

#include "baryvae/errors.hpp"

namespace baryvae {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw DimensionError("matrix " + std::to_string(r) + "x" +
                         std::to_string(c) + " given " +
                         std::to_string(data.size()) + " values");
  }
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) throw DimensionError("row index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace baryvae
