#pragma once

#include "modeshift/clock.hpp"
#include "modeshift/config.hpp"
#include "modeshift/csv.hpp"
#include "modeshift/demand.hpp"
#include "modeshift/digest.hpp"
#include "modeshift/emissions.hpp"
#include "modeshift/error.hpp"
#include "modeshift/gtfs.hpp"
#include "modeshift/meso_sim.hpp"
#include "modeshift/mode_shift.hpp"
#include "modeshift/network.hpp"
#include "modeshift/pipeline.hpp"
#include "modeshift/report.hpp"
#include "modeshift/rng.hpp"
#include "modeshift/synth.hpp"
