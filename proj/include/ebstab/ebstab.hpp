#pragma once

#include "ebstab/analysis.hpp"
#include "ebstab/convex_expr.hpp"
#include "ebstab/error.hpp"
#include "ebstab/moduli.hpp"
#include "ebstab/polytope.hpp"
#include "ebstab/problem.hpp"
#include "ebstab/report.hpp"
#include "ebstab/scenarios.hpp"
#include "ebstab/semi_infinite.hpp"
#include "ebstab/sphere.hpp"
#include "ebstab/types.hpp"
