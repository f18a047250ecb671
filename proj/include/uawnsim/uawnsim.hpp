#pragma once

#include "uawnsim/cache_rl.hpp"
#include "uawnsim/channel.hpp"
#include "uawnsim/channel_params.hpp"
#include "uawnsim/config.hpp"
#include "uawnsim/forecast.hpp"
#include "uawnsim/geojson.hpp"
#include "uawnsim/harness.hpp"
#include "uawnsim/mobility.hpp"
#include "uawnsim/reservoir.hpp"
#include "uawnsim/seeds.hpp"
#include "uawnsim/trajectory_rl.hpp"
#include "uawnsim/world.hpp"
