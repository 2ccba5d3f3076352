#pragma once

#include "beltrami/errors.hpp"
#include "beltrami/field_io.hpp"
#include "beltrami/generators.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/gs_solvers.hpp"
#include "beltrami/interp.hpp"
#include "beltrami/levelset.hpp"
#include "beltrami/operators.hpp"
#include "beltrami/pipeline.hpp"
#include "beltrami/profile.hpp"
#include "beltrami/pullback.hpp"
#include "beltrami/report.hpp"
#include "beltrami/residuals.hpp"
#include "beltrami/rigidity.hpp"
#include "beltrami/scenario.hpp"
#include "beltrami/svg.hpp"
#include "beltrami/vector_field.hpp"
#include "beltrami/vortex_solvers.hpp"
