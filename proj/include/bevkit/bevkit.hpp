// Copyright 2026 The bevkit Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef BEVKIT_BEVKIT_HPP
#define BEVKIT_BEVKIT_HPP

#include "bevkit/bev_grid.hpp"
#include "bevkit/common.hpp"
#include "bevkit/config.hpp"
#include "bevkit/eval3d.hpp"
#include "bevkit/geom.hpp"
#include "bevkit/headmath.hpp"
#include "bevkit/io.hpp"
#include "bevkit/lift_splat.hpp"
#include "bevkit/pointpipe.hpp"
#include "bevkit/random.hpp"
#include "bevkit/synth.hpp"

#endif  // BEVKIT_BEVKIT_HPP
