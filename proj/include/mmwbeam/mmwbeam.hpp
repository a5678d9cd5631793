#pragma once

// Joint beamwidth and transmit-power optimization for multi-pair mmWave
// networks: channel drops, slot physics, action grids, a zero-discount DQN
// and reference baselines.

#include "units.hpp"
#include "rng.hpp"
#include "channel.hpp"
#include "radio.hpp"
#include "actions.hpp"
#include "nn.hpp"
#include "agent.hpp"
#include "baselines.hpp"
#include "config.hpp"
#include "experiment.hpp"
