#pragma once

#include "proxobs/benchmarks.hpp"
#include "proxobs/diagnostics.hpp"
#include "proxobs/errors.hpp"
#include "proxobs/experiment.hpp"
#include "proxobs/kalman.hpp"
#include "proxobs/linalg.hpp"
#include "proxobs/measurement.hpp"
#include "proxobs/noise.hpp"
#include "proxobs/observer.hpp"
#include "proxobs/prox_oracle.hpp"
#include "proxobs/scalar_prox.hpp"
#include "proxobs/simulation.hpp"
#include "proxobs/system.hpp"
#include "proxobs/weighting.hpp"
