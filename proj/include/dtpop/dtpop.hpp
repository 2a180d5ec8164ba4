#pragma once

#include "dtpop/errors.hpp"
#include "dtpop/stats.hpp"
#include "dtpop/sim/clock.hpp"
#include "dtpop/sim/engine.hpp"
#include "dtpop/sim/fifo_server.hpp"
#include "dtpop/sim/network.hpp"
#include "dtpop/sim/rng.hpp"
#include "dtpop/world/mobility.hpp"
#include "dtpop/twin/policy.hpp"
#include "dtpop/twin/blueprint.hpp"
#include "dtpop/twin/local_twin.hpp"
#include "dtpop/twin/edge_twin.hpp"
#include "dtpop/twin/cloud_twin.hpp"
#include "dtpop/scenario/config.hpp"
#include "dtpop/scenario/metrics.hpp"
#include "dtpop/scenario/showcase.hpp"
