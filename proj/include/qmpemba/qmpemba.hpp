#pragma once

#include "common.hpp"
#include "operators.hpp"
#include "davies.hpp"
#include "spectral.hpp"
#include "thermo.hpp"
#include "mpemba.hpp"
#include "metropolis.hpp"
#include "models.hpp"
#include "io.hpp"
