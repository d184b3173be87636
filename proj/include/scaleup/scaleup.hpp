#pragma once

#include "scaleup/config.hpp"
#include "scaleup/cost.hpp"
#include "scaleup/io.hpp"
#include "scaleup/kw.hpp"
#include "scaleup/policy.hpp"
#include "scaleup/rng.hpp"
#include "scaleup/simulate.hpp"
#include "scaleup/state.hpp"
#include "scaleup/stationary.hpp"
#include "scaleup/transitions.hpp"
