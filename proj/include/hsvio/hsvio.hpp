#pragma once

// Everything in one include.

#include "hsvio/error.hpp"
#include "hsvio/geometry/lie.hpp"
#include "hsvio/geometry/camera.hpp"
#include "hsvio/geometry/epipolar.hpp"
#include "hsvio/imaging/image.hpp"
#include "hsvio/imaging/pyramid.hpp"
#include "hsvio/imaging/features.hpp"
#include "hsvio/imaging/optical_flow.hpp"
#include "hsvio/imu.hpp"
#include "hsvio/direct_align.hpp"
#include "hsvio/metrics.hpp"
#include "hsvio/io/csv.hpp"
#include "hsvio/io/keyvalue.hpp"
#include "hsvio/dataset.hpp"
#include "hsvio/tracking/types.hpp"
#include "hsvio/tracking/pose_solver.hpp"
#include "hsvio/tracking/tracker.hpp"
#include "hsvio/tracking/pipeline.hpp"
