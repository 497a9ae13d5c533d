#pragma once

// Umbrella header.

#include "cqbound/common.hpp"
#include "cqbound/consensus.hpp"
#include "cqbound/estimator.hpp"
#include "cqbound/fim.hpp"
#include "cqbound/graph.hpp"
#include "cqbound/harness.hpp"
#include "cqbound/network.hpp"
#include "cqbound/oracle.hpp"
#include "cqbound/particles.hpp"
#include "cqbound/quantizer.hpp"
#include "cqbound/rng.hpp"
#include "cqbound/scenario.hpp"
#include "cqbound/state_space.hpp"
