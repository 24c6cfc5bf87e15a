#pragma once

#include "smoothcruiser/complexity.hpp"
#include "smoothcruiser/environments.hpp"
#include "smoothcruiser/errors.hpp"
#include "smoothcruiser/exact_solver.hpp"
#include "smoothcruiser/operators.hpp"
#include "smoothcruiser/planner.hpp"
#include "smoothcruiser/rng.hpp"
#include "smoothcruiser/validation.hpp"
