#pragma once

#include "frontier/errors.hpp"
#include "frontier/rng.hpp"
#include "frontier/parallel.hpp"
#include "frontier/model.hpp"
#include "frontier/polyopt.hpp"
#include "frontier/kernels.hpp"
#include "frontier/estimators.hpp"
#include "frontier/gof.hpp"
#include "frontier/harness.hpp"
