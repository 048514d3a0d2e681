#pragma once

/// Umbrella header for the whole library.

#include "qvi/commands.hpp"
#include "qvi/control.hpp"
#include "qvi/csv.hpp"
#include "qvi/discretize.hpp"
#include "qvi/error.hpp"
#include "qvi/functions.hpp"
#include "qvi/game.hpp"
#include "qvi/gengame.hpp"
#include "qvi/grid.hpp"
#include "qvi/matrixkit.hpp"
#include "qvi/oracle.hpp"
#include "qvi/simulate.hpp"
#include "qvi/specfile.hpp"
#include "qvi/symgame.hpp"
