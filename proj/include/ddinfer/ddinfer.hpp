#pragma once

// Everything except the command-line front end (ddinfer/cli.hpp).

#include "ddinfer/config.hpp"
#include "ddinfer/dataset.hpp"
#include "ddinfer/dd_solver.hpp"
#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"
#include "ddinfer/harness.hpp"
#include "ddinfer/inference.hpp"
#include "ddinfer/lattice.hpp"
#include "ddinfer/measures.hpp"
#include "ddinfer/numerics.hpp"
#include "ddinfer/quadrature.hpp"
#include "ddinfer/report.hpp"
#include "ddinfer/truss.hpp"
#include "ddinfer/truss_io.hpp"
