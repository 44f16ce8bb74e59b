#pragma once

#include "shardbal/config.hpp"
#include "shardbal/diffusion.hpp"
#include "shardbal/error.hpp"
#include "shardbal/fixed_point.hpp"
#include "shardbal/fixture.hpp"
#include "shardbal/migration.hpp"
#include "shardbal/report.hpp"
#include "shardbal/schedulers.hpp"
#include "shardbal/sim.hpp"
#include "shardbal/topology.hpp"
#include "shardbal/workload.hpp"
