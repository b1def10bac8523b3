#pragma once

// Umbrella header for the full library.

#include "isac/action.hpp"
#include "isac/common.hpp"
#include "isac/config.hpp"
#include "isac/episode.hpp"
#include "isac/hash.hpp"
#include "isac/nn.hpp"
#include "isac/outputs.hpp"
#include "isac/policy.hpp"
#include "isac/rng.hpp"
#include "isac/sweep.hpp"
#include "isac/telemetry.hpp"
#include "isac/train.hpp"
#include "isac/twin.hpp"
#include "isac/world.hpp"
