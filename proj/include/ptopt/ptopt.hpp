#pragma once

#include "ptopt/config.hpp"
#include "ptopt/csv.hpp"
#include "ptopt/ctcs.hpp"
#include "ptopt/discretizer.hpp"
#include "ptopt/montecarlo.hpp"
#include "ptopt/pipg.hpp"
#include "ptopt/rocket6dof.hpp"
#include "ptopt/rocket_problem.hpp"
#include "ptopt/scp.hpp"
#include "ptopt/smallmat.hpp"
#include "ptopt/trajectory.hpp"
