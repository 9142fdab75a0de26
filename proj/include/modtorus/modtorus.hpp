#pragma once

/// Umbrella header for the modtorus library.

#include "modtorus/error.hpp"
#include "modtorus/arith.hpp"
#include "modtorus/parallel.hpp"
#include "modtorus/expsum.hpp"
#include "modtorus/bessel.hpp"
#include "modtorus/kernels.hpp"
#include "modtorus/torusgeo.hpp"
#include "modtorus/stats.hpp"
