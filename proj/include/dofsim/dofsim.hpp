// Copyright (c) 2026 The dofsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header for the dofsim library.

#ifndef DOFSIM_DOFSIM_HPP
#define DOFSIM_DOFSIM_HPP

#include "dofsim/bench.hpp"
#include "dofsim/config.hpp"
#include "dofsim/dataprep.hpp"
#include "dofsim/error.hpp"
#include "dofsim/image.hpp"
#include "dofsim/image_io.hpp"
#include "dofsim/isp.hpp"
#include "dofsim/metrics.hpp"
#include "dofsim/psf.hpp"
#include "dofsim/render.hpp"
#include "dofsim/rng.hpp"
#include "dofsim/sensor.hpp"

#endif  // DOFSIM_DOFSIM_HPP
