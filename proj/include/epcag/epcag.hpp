#pragma once

#include "epcag/ap_solver.hpp"
#include "epcag/cauchy.hpp"
#include "epcag/dichotomy.hpp"
#include "epcag/errors.hpp"
#include "epcag/green_operator.hpp"
#include "epcag/grid_solution.hpp"
#include "epcag/ivp.hpp"
#include "epcag/json_io.hpp"
#include "epcag/logistic.hpp"
#include "epcag/math_util.hpp"
#include "epcag/piecewise.hpp"
#include "epcag/problem.hpp"
#include "epcag/rk45.hpp"
#include "epcag/sequence_diagnostics.hpp"
#include "epcag/switching_sequence.hpp"
#include "epcag/trig_polynomial.hpp"
