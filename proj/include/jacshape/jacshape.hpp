#pragma once

#include "jacshape/error.hpp"
#include "jacshape/grid.hpp"
#include "jacshape/domain.hpp"
#include "jacshape/field.hpp"
#include "jacshape/interpolate.hpp"
#include "jacshape/quadrature_1d.hpp"
#include "jacshape/div_solver.hpp"
#include "jacshape/grid_map.hpp"
#include "jacshape/report.hpp"
#include "jacshape/moser.hpp"
#include "jacshape/jacobian_solver.hpp"
#include "jacshape/fixtures.hpp"
#include "jacshape/experiment.hpp"
