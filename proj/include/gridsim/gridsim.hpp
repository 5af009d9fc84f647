#pragma once

#include "gridsim/control/adp.hpp"
#include "gridsim/control/cost.hpp"
#include "gridsim/control/dqn.hpp"
#include "gridsim/control/hybrid.hpp"
#include "gridsim/control/ppo.hpp"
#include "gridsim/core/bus_state.hpp"
#include "gridsim/core/errors.hpp"
#include "gridsim/core/random.hpp"
#include "gridsim/cyber/actuation.hpp"
#include "gridsim/cyber/channel.hpp"
#include "gridsim/devices/load.hpp"
#include "gridsim/devices/renewables.hpp"
#include "gridsim/devices/storage.hpp"
#include "gridsim/dynamics/dae.hpp"
#include "gridsim/dynamics/generator.hpp"
#include "gridsim/grid/network.hpp"
#include "gridsim/grid/network_io.hpp"
#include "gridsim/grid/power_flow.hpp"
#include "gridsim/grid/ybus.hpp"
#include "gridsim/gridsim.hpp"
#include "gridsim/market/ems.hpp"
#include "gridsim/market/game.hpp"
#include "gridsim/metrics/resilience.hpp"
#include "gridsim/nn/gradcheck.hpp"
#include "gridsim/nn/mlp.hpp"
#include "gridsim/nn/optimizer.hpp"
#include "gridsim/sim/engine.hpp"
#include "gridsim/sim/records.hpp"
#include "gridsim/sim/scenario.hpp"
