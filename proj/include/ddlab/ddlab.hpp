#pragma once

#include "errors.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "state_space.hpp"
#include "pmf_io.hpp"
#include "forward.hpp"
#include "schedule.hpp"
#include "score.hpp"
#include "samplers.hpp"
#include "quadrature.hpp"
#include "info_metrics.hpp"
#include "ode.hpp"
#include "targets.hpp"
#include "experiments.hpp"
