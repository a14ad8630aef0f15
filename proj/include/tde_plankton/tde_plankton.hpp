#pragma once

#include "tde_plankton/continuation.hpp"
#include "tde_plankton/equilibria.hpp"
#include "tde_plankton/errors.hpp"
#include "tde_plankton/linearize.hpp"
#include "tde_plankton/model.hpp"
#include "tde_plankton/roots.hpp"
#include "tde_plankton/simulate.hpp"
