#pragma once

#include "twosided/config.hpp"
#include "twosided/curves.hpp"
#include "twosided/errors.hpp"
#include "twosided/experiment.hpp"
#include "twosided/fluid.hpp"
#include "twosided/metrics.hpp"
#include "twosided/oracles.hpp"
#include "twosided/policies.hpp"
#include "twosided/queueing.hpp"
#include "twosided/rng.hpp"
#include "twosided/schedule.hpp"
#include "twosided/topology.hpp"
