#pragma once

#include "mindpilot/core/catalog.hpp"
#include "mindpilot/core/error.hpp"
#include "mindpilot/core/json.hpp"
#include "mindpilot/core/math.hpp"
#include "mindpilot/core/rng.hpp"
#include "mindpilot/baselines.hpp"
#include "mindpilot/bench.hpp"
#include "mindpilot/evolve.hpp"
#include "mindpilot/features.hpp"
#include "mindpilot/io.hpp"
#include "mindpilot/oracle.hpp"
#include "mindpilot/search.hpp"
#include "mindpilot/stats.hpp"
#include "mindpilot/surrogate.hpp"
#include "mindpilot/service.hpp"
