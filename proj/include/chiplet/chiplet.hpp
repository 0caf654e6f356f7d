#pragma once

// Umbrella header.

#include "chiplet/rng.hpp"
#include "chiplet/parallel.hpp"
#include "chiplet/hexlattice.hpp"
#include "chiplet/device.hpp"
#include "chiplet/collision.hpp"
#include "chiplet/fabsim.hpp"
#include "chiplet/noise.hpp"
#include "chiplet/mcm.hpp"
#include "chiplet/analysis.hpp"
#include "chiplet/bench.hpp"
#include "chiplet/io.hpp"
#include "chiplet/experiment.hpp"
