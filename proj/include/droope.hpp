#pragma once

#include "droope/devices.hpp"
#include "droope/metrics.hpp"
#include "droope/network.hpp"
#include "droope/report.hpp"
#include "droope/scenario.hpp"
#include "droope/smallsignal.hpp"
#include "droope/system.hpp"
#include "droope/timedomain.hpp"
#include "droope/types.hpp"
