#pragma once

#include <vector>

#include "palx/tensor.hpp"

namespace palx {

// Sinusoidal encoding of a scalar position x >= 0: slot 2i holds
// sin(x / n^(2i/d)) and slot 2i+1 holds cos of the same argument.
std::vector<double> word_positional_encoding(double x, int d, double n = 10000.0);

// Encodings for integer positions 0..length-1 stacked as a constant [length x d].
Tensor word_pe_table(int length, int d, double n = 10000.0);

// 2-D grid encoding [gh x gw x d_model]: the first d/2 slots encode the
// normalized row coordinate r/gh, the last d/2 the normalized column c/gw.
// Depends only on the grid geometry, never on image content.
Tensor image_positional_encoding(int gh, int gw, int d_model);

}  // namespace palx
