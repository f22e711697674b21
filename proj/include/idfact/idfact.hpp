#pragma once

#include "idfact/errors.hpp"
#include "idfact/linalg.hpp"
#include "idfact/column_select.hpp"
#include "idfact/static_factor.hpp"
#include "idfact/matrix_path.hpp"
#include "idfact/continuous_factor.hpp"
#include "idfact/ensemble.hpp"
#include "idfact/io.hpp"
