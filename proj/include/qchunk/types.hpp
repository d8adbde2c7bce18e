#pragma once

#include <Eigen/Dense>

namespace qchunk {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// All learning-side math runs in 64-bit floats; file formats that store
// f32 (the dataset format) convert at the I/O boundary only.

}  // namespace qchunk
