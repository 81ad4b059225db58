#include "palx/positional.hpp"

#include <cmath>
#include <string>

#include "palx/errors.hpp"

namespace palx {

std::vector<double> word_positional_encoding(double x, int d, double n) {
  if (d <= 0 || d % 2 != 0)
    throw ConfigError("positional encoding width must be positive and even, got " +
                      std::to_string(d));
  if (n <= 0.0) throw ConfigError("positional encoding base must be positive");
  if (x < 0.0) throw ContractError("position must be nonnegative");
  std::vector<double> out(d);
  for (int i = 0; 2 * i < d; ++i) {
    double arg = x / std::pow(n, 2.0 * i / d);
    out[2 * i] = std::sin(arg);
    out[2 * i + 1] = std::cos(arg);
  }
  return out;
}

Tensor word_pe_table(int length, int d, double n) {
  if (length < 1) throw ContractError("positional table needs length >= 1");
  std::vector<double> data;
  data.reserve(static_cast<size_t>(length) * d);
  for (int x = 0; x < length; ++x) {
    std::vector<double> row = word_positional_encoding(x, d, n);
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({length, d}, std::move(data));
}

Tensor image_positional_encoding(int gh, int gw, int d_model) {
  if (gh < 1 || gw < 1) throw DimensionError("positional grid must be at least 1x1");
  if (d_model <= 0 || d_model % 4 != 0)
    throw ConfigError("2-D positional encoding needs d_model divisible by 4, got " +
                      std::to_string(d_model));
  int half = d_model / 2;
  std::vector<std::vector<double>> col_pe(gw);
  for (int c = 0; c < gw; ++c)
    col_pe[c] = word_positional_encoding(static_cast<double>(c) / gw, half);
  std::vector<double> data(static_cast<size_t>(gh) * gw * d_model);
  for (int r = 0; r < gh; ++r) {
    std::vector<double> row_pe = word_positional_encoding(static_cast<double>(r) / gh, half);
    for (int c = 0; c < gw; ++c) {
      double* cell = data.data() + (static_cast<size_t>(r) * gw + c) * d_model;
      std::copy(row_pe.begin(), row_pe.end(), cell);
      std::copy(col_pe[c].begin(), col_pe[c].end(), cell + half);
    }
  }
  return Tensor({gh, gw, d_model}, std::move(data));
}

}  // namespace palx
