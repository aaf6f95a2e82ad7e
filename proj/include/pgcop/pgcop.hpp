#pragma once

#include "pgcop/numerics.hpp"
#include "pgcop/projected_gamma.hpp"
#include "pgcop/copula.hpp"
#include "pgcop/joint_model.hpp"
#include "pgcop/inference.hpp"
#include "pgcop/diagnostics.hpp"
#include "pgcop/io.hpp"
