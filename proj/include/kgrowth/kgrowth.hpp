#pragma once

#include "kgrowth/errors.hpp"
#include "kgrowth/model.hpp"
#include "kgrowth/grid.hpp"
#include "kgrowth/boltzmann.hpp"
#include "kgrowth/hjb.hpp"
#include "kgrowth/coupling.hpp"
#include "kgrowth/localmfg.hpp"
#include "kgrowth/bgp.hpp"
#include "kgrowth/config.hpp"
#include "kgrowth/runner.hpp"
