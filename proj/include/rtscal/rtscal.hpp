#pragma once

// rtscal - extrinsic calibration of multiple robotic total stations from
// moving-prism trajectories.  Include this header for the whole library.

#include "rtscal/calibrate.hpp"
#include "rtscal/config.hpp"
#include "rtscal/errors.hpp"
#include "rtscal/io.hpp"
#include "rtscal/metrics.hpp"
#include "rtscal/preprocess.hpp"
#include "rtscal/se3.hpp"
#include "rtscal/simulate.hpp"
#include "rtscal/types.hpp"
#include "rtscal/version.hpp"
