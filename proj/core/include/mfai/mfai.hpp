#pragma once

#include "mfai/aux_table.hpp"
#include "mfai/baselines.hpp"
#include "mfai/boost.hpp"
#include "mfai/data.hpp"
#include "mfai/factor.hpp"
#include "mfai/io.hpp"
#include "mfai/model.hpp"
#include "mfai/rng.hpp"
#include "mfai/rtree.hpp"
#include "mfai/sim.hpp"
