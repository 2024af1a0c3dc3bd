#pragma once

#include "assignment.hpp"
#include "beamforming/builder.hpp"
#include "beamforming/model.hpp"
#include "beamforming/sca.hpp"
#include "channels.hpp"
#include "conic/cones.hpp"
#include "conic/program.hpp"
#include "conic/randomization.hpp"
#include "conic/solver.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rate.hpp"
#include "rng.hpp"
#include "scenario.hpp"
#include "solution.hpp"
#include "matching.hpp"
#include "orchestrator.hpp"
#include "verifier.hpp"
#include "experiment.hpp"
