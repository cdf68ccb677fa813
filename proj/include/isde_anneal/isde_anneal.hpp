#pragma once

// Umbrella header.

#include "isde_anneal/annealing.hpp"
#include "isde_anneal/constraints.hpp"
#include "isde_anneal/errors.hpp"
#include "isde_anneal/experiment.hpp"
#include "isde_anneal/isde.hpp"
#include "isde_anneal/linalg.hpp"
#include "isde_anneal/objectives.hpp"
#include "isde_anneal/presets.hpp"
#include "isde_anneal/rng.hpp"
#include "isde_anneal/serialization.hpp"
#include "isde_anneal/surrogate.hpp"
