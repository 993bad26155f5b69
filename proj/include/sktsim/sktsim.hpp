#pragma once

#include "sktsim/config.hpp"
#include "sktsim/diagnostics.hpp"
#include "sktsim/ensemble.hpp"
#include "sktsim/errors.hpp"
#include "sktsim/grid.hpp"
#include "sktsim/integrators.hpp"
#include "sktsim/io.hpp"
#include "sktsim/model.hpp"
#include "sktsim/noise.hpp"
#include "sktsim/rng.hpp"
#include "sktsim/runner.hpp"
#include "sktsim/version.hpp"
