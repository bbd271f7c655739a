#pragma once

#include "ssmi/convert.hpp"
#include "ssmi/errors.hpp"
#include "ssmi/geometry.hpp"
#include "ssmi/gridmap.hpp"
#include "ssmi/io.hpp"
#include "ssmi/logodds.hpp"
#include "ssmi/mutual_info.hpp"
#include "ssmi/octree.hpp"
#include "ssmi/planner.hpp"
#include "ssmi/semantics.hpp"
#include "ssmi/srle.hpp"
#include "ssmi/trajectory.hpp"
#include "ssmi/sim/config.hpp"
#include "ssmi/sim/environment.hpp"
#include "ssmi/sim/episode.hpp"
#include "ssmi/sim/mi_check.hpp"
#include "ssmi/sim/rng.hpp"
#include "ssmi/sim/scenes.hpp"
#include "ssmi/sim/sensor.hpp"
#include "ssmi/sim/srle_study.hpp"
