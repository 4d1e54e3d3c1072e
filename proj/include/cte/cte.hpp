#pragma once

#include "cte/distributions.hpp"
#include "cte/empirical.hpp"
#include "cte/error.hpp"
#include "cte/estimators.hpp"
#include "cte/montecarlo.hpp"
#include "cte/report.hpp"
#include "cte/rng.hpp"
#include "cte/tail_inference.hpp"
