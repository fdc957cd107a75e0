#pragma once

#include "kqe/core.hpp"
#include "kqe/datagen.hpp"
#include "kqe/directions.hpp"
#include "kqe/discrepancies.hpp"
#include "kqe/io.hpp"
#include "kqe/kernels.hpp"
#include "kqe/quantiles.hpp"
#include "kqe/statistic.hpp"
#include "kqe/testing.hpp"
#include "kqe/weighting.hpp"
