#pragma once

#include "dnnchaos/classification.hpp"
#include "dnnchaos/constructions.hpp"
#include "dnnchaos/core.hpp"
#include "dnnchaos/entropy_estimators.hpp"
#include "dnnchaos/errors.hpp"
#include "dnnchaos/lyapunov.hpp"
#include "dnnchaos/meanfield.hpp"
#include "dnnchaos/network_io.hpp"
#include "dnnchaos/parallel.hpp"
#include "dnnchaos/rng.hpp"
#include "dnnchaos/shatter.hpp"
