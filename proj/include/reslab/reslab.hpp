#pragma once

/// \file reslab.hpp
/// \brief Umbrella header.

#include "reslab/bifurcation.hpp"
#include "reslab/config.hpp"
#include "reslab/error.hpp"
#include "reslab/experiment.hpp"
#include "reslab/grid.hpp"
#include "reslab/io.hpp"
#include "reslab/nonlinearity.hpp"
#include "reslab/potential.hpp"
#include "reslab/resonance_solver.hpp"
#include "reslab/rng.hpp"
#include "reslab/semiflow.hpp"
#include "reslab/spectral.hpp"
