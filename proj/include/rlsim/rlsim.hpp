#pragma once

// Umbrella header for the rlsim library.

#include "rlsim/analytics.hpp"
#include "rlsim/attribution.hpp"
#include "rlsim/calibration.hpp"
#include "rlsim/config_io.hpp"
#include "rlsim/engine.hpp"
#include "rlsim/gpumodel.hpp"
#include "rlsim/model.hpp"
#include "rlsim/power.hpp"
#include "rlsim/presets.hpp"
#include "rlsim/report.hpp"
#include "rlsim/rlsys.hpp"
#include "rlsim/rng.hpp"
