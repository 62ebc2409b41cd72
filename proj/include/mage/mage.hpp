#pragma once

// Umbrella header for the Monge-Ampere grid experiments library.

#include "mage/audits.hpp"
#include "mage/calculus.hpp"
#include "mage/envelope.hpp"
#include "mage/errors.hpp"
#include "mage/experiment.hpp"
#include "mage/field.hpp"
#include "mage/grid.hpp"
#include "mage/metric.hpp"
#include "mage/mollifier.hpp"
#include "mage/rng.hpp"
#include "mage/solver.hpp"
#include "mage/spectral.hpp"
