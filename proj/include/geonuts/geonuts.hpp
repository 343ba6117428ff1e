#pragma once

#include "geonuts/diagnostics.hpp"
#include "geonuts/harmonic.hpp"
#include "geonuts/integrators.hpp"
#include "geonuts/metrics.hpp"
#include "geonuts/phase.hpp"
#include "geonuts/sampler.hpp"
#include "geonuts/targets.hpp"
#include "geonuts/termination.hpp"
#include "geonuts/trajectory.hpp"
