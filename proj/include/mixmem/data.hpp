#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace mixmem {

template <class T>
using Grid = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RealGrid = Grid<double>;

/// N x M table of non-negative integer attribute values, with observation
/// ids (rows) and attribute labels (columns).
class CountMatrix {
 public:
  using Value = std::int64_t;

  CountMatrix() = default;

  explicit CountMatrix(Grid<Value> values, std::vector<std::string> row_ids = {},
                       std::vector<std::string> col_ids = {}, std::string id_header = "id")
      : values_(std::move(values)),
        row_ids_(std::move(row_ids)),
        col_ids_(std::move(col_ids)),
        id_header_(std::move(id_header)) {
    if (values_.rows() < 1 || values_.cols() < 1) {
      throw std::invalid_argument("CountMatrix: need at least one row and one column");
    }
    for (Eigen::Index n = 0; n < values_.rows(); ++n) {
      for (Eigen::Index m = 0; m < values_.cols(); ++m) {
        if (values_(n, m) < 0) {
          throw std::invalid_argument("CountMatrix: negative count at row " + std::to_string(n + 1) +
                                      ", column " + std::to_string(m + 1));
        }
      }
    }
    if (row_ids_.empty()) {
      for (Eigen::Index n = 0; n < values_.rows(); ++n) row_ids_.push_back("obs" + std::to_string(n + 1));
    }
    if (col_ids_.empty()) {
      for (Eigen::Index m = 0; m < values_.cols(); ++m) col_ids_.push_back("h" + std::to_string(m + 1));
    }
    if (row_ids_.size() != static_cast<std::size_t>(values_.rows()) ||
        col_ids_.size() != static_cast<std::size_t>(values_.cols())) {
      throw std::invalid_argument("CountMatrix: label count does not match shape");
    }
  }

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  Value operator()(std::size_t n, std::size_t m) const {
    return values_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  }

  const Grid<Value>& values() const { return values_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& col_ids() const { return col_ids_; }
  const std::string& id_header() const { return id_header_; }

  /// Column m as a contiguous vector.
  std::vector<Value> column(std::size_t m) const {
    std::vector<Value> out(rows());
    for (std::size_t n = 0; n < rows(); ++n) out[n] = (*this)(n, m);
    return out;
  }

  double column_mean(std::size_t m) const {
    double acc = 0.0;
    for (std::size_t n = 0; n < rows(); ++n) acc += static_cast<double>((*this)(n, m));
    return acc / static_cast<double>(rows());
  }

  /// Rows selected by index, labels carried along.
  CountMatrix select_rows(const std::vector<std::size_t>& idx) const {
    Grid<Value> out(static_cast<Eigen::Index>(idx.size()), values_.cols());
    std::vector<std::string> ids;
    ids.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(idx[i]));
      ids.push_back(row_ids_.at(idx[i]));
    }
    return CountMatrix(std::move(out), std::move(ids), col_ids_, id_header_);
  }

 private:
  Grid<Value> values_;
  std::vector<std::string> row_ids_;
  std::vector<std::string> col_ids_;
  std::string id_header_ = "id";
};

}  // namespace mixmem
