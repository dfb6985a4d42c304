// Copyright 2026 The melwave Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Core>

namespace melwave {

// Row-major everywhere: a spectrogram row is one analysis frame and the
// per-frame FFT kernels want contiguous rows.
using Mat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

}  // namespace melwave
