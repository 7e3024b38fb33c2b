#pragma once

// Convenience umbrella: the whole library in one include.

#include "wandcal/cli.hpp"
#include "wandcal/core.hpp"
#include "wandcal/evaluate.hpp"
#include "wandcal/gauge.hpp"
#include "wandcal/geometry.hpp"
#include "wandcal/io.hpp"
#include "wandcal/lm_solver.hpp"
#include "wandcal/lp/enumerate.hpp"
#include "wandcal/lp/factor.hpp"
#include "wandcal/lp/mps.hpp"
#include "wandcal/lp/problem.hpp"
#include "wandcal/lp/selftest.hpp"
#include "wandcal/lp/simplex.hpp"
#include "wandcal/lp/subproblem.hpp"
#include "wandcal/observations.hpp"
#include "wandcal/refine.hpp"
#include "wandcal/residuals.hpp"
#include "wandcal/simulate.hpp"
#include "wandcal/state.hpp"
