#include "bfl/tensor.hpp"

#include "bfl/errors.hpp"

namespace bfl {

void Matrix::push_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) {
    cols_ = values.size();
  } else if (values.size() != cols_) {
    throw ShapeError("push_row: expected " + std::to_string(cols_) + " columns, got " +
                     std::to_string(values.size()));
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

}  // namespace bfl
