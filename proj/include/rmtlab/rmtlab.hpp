#pragma once

#include "rmtlab/config.hpp"
#include "rmtlab/ensemble.hpp"
#include "rmtlab/errors.hpp"
#include "rmtlab/io.hpp"
#include "rmtlab/montecarlo.hpp"
#include "rmtlab/mp_limit.hpp"
#include "rmtlab/parallel.hpp"
#include "rmtlab/stats.hpp"
#include "rmtlab/test_function.hpp"
#include "rmtlab/variance.hpp"
#include "rmtlab/vectors.hpp"
