#pragma once

#include "pddsparse/types.hpp"
#include "pddsparse/random.hpp"
#include "pddsparse/parallel.hpp"
#include "pddsparse/geometry.hpp"
#include "pddsparse/interp.hpp"
#include "pddsparse/stochastics.hpp"
#include "pddsparse/sparse.hpp"
#include "pddsparse/assembly.hpp"
#include "pddsparse/matrix_analysis.hpp"
#include "pddsparse/preconditioning.hpp"
#include "pddsparse/krylov.hpp"
#include "pddsparse/bench.hpp"
