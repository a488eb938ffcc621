#pragma once

#include <string>

#include "convpoint/conv_layer.hpp"

namespace convpoint {

// Weighting response of each kernel element sampled on an R x R grid over
// [-1,1]^2 (2-D kernels only). Row r*R + c is the grid point
// (x, y) = (-1 + 2c/(R-1), -1 + 2r/(R-1)); columns are the K responses.
Tensor weighting_response_grid(const ConvKernel& kernel, const WeightingNetwork& net,
                               std::size_t resolution);

// Composed spatial filters: for each (input feature f, output channel t),
// sum_i weights[i,f,t] * response[., i]. Shape R*R x (n*C), column f*C + t.
Tensor composed_filter_grid(const ConvKernel& kernel, const Tensor& response);

// Write both grids as headered CSV (x, y, then one column per element /
// per feature-channel pair).
void dump_filters_csv(const std::string& response_path, const std::string& composed_path,
                      const ConvKernel& kernel, const WeightingNetwork& net,
                      std::size_t resolution);

} // namespace convpoint
