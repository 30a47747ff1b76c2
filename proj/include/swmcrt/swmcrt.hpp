#pragma once

#include "swmcrt/ci.hpp"
#include "swmcrt/combine.hpp"
#include "swmcrt/config.hpp"
#include "swmcrt/design.hpp"
#include "swmcrt/io.hpp"
#include "swmcrt/mcrt.hpp"
#include "swmcrt/parallel.hpp"
#include "swmcrt/permtest.hpp"
#include "swmcrt/rng.hpp"
#include "swmcrt/sim.hpp"
#include "swmcrt/validate.hpp"
