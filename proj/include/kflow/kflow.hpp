#pragma once

#include "kflow/errors.hpp"
#include "kflow/grid.hpp"
#include "kflow/metric.hpp"
#include "kflow/geodesic.hpp"
#include "kflow/profiles.hpp"
#include "kflow/spectral.hpp"
#include "kflow/ricci.hpp"
#include "kflow/trace.hpp"
#include "kflow/functionals.hpp"
#include "kflow/flow.hpp"
#include "kflow/experiments.hpp"
#include "kflow/io.hpp"
#include "kflow/config.hpp"
#include "kflow/svg.hpp"
#include "kflow/cli.hpp"
