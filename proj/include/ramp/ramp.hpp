#pragma once

#include "ramp/adaptation.hpp"
#include "ramp/baseline.hpp"
#include "ramp/checkpoint.hpp"
#include "ramp/config.hpp"
#include "ramp/core.hpp"
#include "ramp/envs.hpp"
#include "ramp/features.hpp"
#include "ramp/io.hpp"
#include "ramp/metrics.hpp"
#include "ramp/oracle.hpp"
#include "ramp/pipeline.hpp"
#include "ramp/planner.hpp"
#include "ramp/qbasis.hpp"
#include "ramp/rewardfit.hpp"
#include "ramp/tinynet.hpp"
