#pragma once

#include "phaselock/calibration.hpp"
#include "phaselock/control.hpp"
#include "phaselock/counting.hpp"
#include "phaselock/error.hpp"
#include "phaselock/harness/compare.hpp"
#include "phaselock/harness/config.hpp"
#include "phaselock/harness/experiment.hpp"
#include "phaselock/metrics.hpp"
#include "phaselock/plant.hpp"
